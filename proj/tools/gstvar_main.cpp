#include "gstvar/io.hpp"
#include "gstvar/estimation.hpp"
#include "gstvar/structural.hpp"
#include "gstvar/diagnostics.hpp"
#include "gstvar/montecarlo.hpp"
int main() { return 0; }

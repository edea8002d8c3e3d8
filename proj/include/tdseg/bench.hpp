#ifndef TDSEG_BENCH_HPP
#define TDSEG_BENCH_HPP

#include <string>

namespace tdseg {

// Wall-time report: forward/backward per network variant at base widths 4
// and 8, fwht vs naive dense transform at N=128, and parameter counts for
// the shipped large configs next to their nominal reference sizes. The
// report structure is deterministic; the timings are not.
std::string run_bench();

}  // namespace tdseg

#endif

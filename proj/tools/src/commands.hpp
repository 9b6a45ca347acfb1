#pragma once

#include "run_config.hpp"

namespace brc::cli {

// Each command writes only below rc.out(). They throw ConfigError, DataError
// or (with --strict, after writing their outputs) ConvergenceError.
void run_simulate(const RunConfig& rc);
void run_fit(const RunConfig& rc);
void run_select(const RunConfig& rc);
void run_debias_sequence(const RunConfig& rc);
void run_study(const RunConfig& rc);
void run_evaluate(const RunConfig& rc);

}  // namespace brc::cli

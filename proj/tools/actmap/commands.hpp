#pragma once

#include <optional>
#include <string>

#include "config.hpp"

namespace actmap::cli {

// One entry per subcommand. Each loads the config named by the flags,
// resolves it against the command's schema, writes the resolved config
// into the output directory and produces the command's artifacts.
// ConfigError signals a bad config (exit 2); anything else a runtime
// failure (exit 1).
void cmd_gen_data(const FlagValues& flags);
void cmd_train_flow(const FlagValues& flags);
void cmd_train_streams(const FlagValues& flags);
void cmd_classify(const FlagValues& flags);
void cmd_map(const FlagValues& flags);
void cmd_timeline(const FlagValues& flags);
void cmd_weather(const FlagValues& flags);
void cmd_tagcheck(const FlagValues& flags);
void cmd_eval(const FlagValues& flags);
void cmd_bench(const FlagValues& flags);

// Reads the artifacts under results_dir and renders the summary bundle
// (report.txt + report.csv) into out_dir (results_dir when unset).
void cmd_report(const std::string& results_dir,
                const std::optional<std::string>& out_dir);

}  // namespace actmap::cli

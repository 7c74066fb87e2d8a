#pragma once

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace diffprobe::cli {

/// Bad invocation or config; maps to exit status 1.
class UsageError : public std::runtime_error {
   public:
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

struct RunConfig {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    double epsilon = 1e-6;
    std::vector<double> alpha_grid{-3, -2, -1, 0, 1, 2, 3};
    std::size_t bins = 3;
    std::vector<int> positions{-1, -2, -3};
    std::size_t top_k = 3;
    std::size_t length_bucket_width = 250;
    std::size_t threads = 0;  // 0 = auto
    std::string out_dir = ".";
};

/// Parses a JSON config object over the defaults. Unknown keys and type
/// mismatches raise UsageError naming the key.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// Runs one subcommand. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace diffprobe::cli

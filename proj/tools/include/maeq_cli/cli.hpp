#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "maeq/data.hpp"

namespace maeq::cli {

enum ExitCode : int {
    kOk = 0,
    kUnexpected = 1,
    kUsage = 2,
    kConfig = 3,
    kIo = 4,
    kCompute = 5,
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Environment variable holding the default output directory.
inline constexpr const char* kOutDirEnv = "MAEQ_OUT_DIR";

/// Runs the tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// One group as CSV with header `dose,response`.
GroupData read_group_csv(const std::filesystem::path& path, const std::string& label);

}  // namespace maeq::cli

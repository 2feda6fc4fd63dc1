#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pam::cli {

// Exit codes
inline constexpr int kOk = 0;
inline constexpr int kConfigError = 2;
inline constexpr int kNumericError = 3;
inline constexpr int kInconclusive = 4;

int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);  // args[0] is the program name

std::uint64_t fnv1a(std::string_view bytes);

}  // namespace pam::cli

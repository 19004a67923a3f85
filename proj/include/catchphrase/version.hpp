#pragma once

#include <string_view>

namespace catchphrase {

inline constexpr std::string_view kLibraryVersion = "0.1.0";

}  // namespace catchphrase

#ifndef RGACHESS_VERSION_HPP
#define RGACHESS_VERSION_HPP

namespace rgachess {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace rgachess

#endif  // RGACHESS_VERSION_HPP

#pragma once

#include <filesystem>
#include <fstream>
#include <system_error>

#include <fmt/format.h>

#include "arrp/network.hpp"

namespace arrp::io {

// Writes through `fill` into `path.tmp`, then renames it over `path`, so a
// failed write never leaves a truncated file behind.
template <typename Fill>
void write_atomically(const std::filesystem::path& path, Fill&& fill) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError(fmt::format("cannot write {}", tmp.string()));
    fill(out);
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw InputError(fmt::format("write to {} failed", tmp.string()));
    }
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace arrp::io

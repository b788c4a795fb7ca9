#include "core/types.hpp"

#include <sstream>

namespace memlayout {

std::string hex(Addr v) {
  std::ostringstream os;
  os << "0x" << std::hex << v;
  return os.str();
}

std::string format_size(Size v) {
  std::ostringstream os;
  if (v != 0 && v % mib(1) == 0)
    os << (v / mib(1)) << "M";
  else if (v != 0 && v % kib(1) == 0)
    os << (v / kib(1)) << "K";
  else
    os << v;
  return os.str();
}

std::string to_string(const Permissions& p) {
  static const char* names[] = {"ur", "uw", "ux", "kr", "kw", "kx"};
  std::string out;
  unsigned b = p.bits();
  for (unsigned i = 0; i < 6; ++i) {
    if (b & (1u << i)) {
      if (!out.empty()) out += "+";
      out += names[i];
    }
  }
  return out.empty() ? "none" : out;
}

std::optional<Permissions> permissions_from_string(const std::string& s) {
  Permissions p;
  std::string tok;
  auto apply = [&](const std::string& t) -> bool {
    if (t == "ur") p.user_read = true;
    else if (t == "uw") p.user_write = true;
    else if (t == "ux") p.user_exec = true;
    else if (t == "kr") p.kernel_read = true;
    else if (t == "kw") p.kernel_write = true;
    else if (t == "kx") p.kernel_exec = true;
    else return false;
    return true;
  };
  for (char c : s) {
    if (c == '+' || c == ',' || c == ' ') {
      if (!tok.empty() && !apply(tok)) return std::nullopt;
      tok.clear();
    } else {
      tok += static_cast<char>(::tolower(c));
    }
  }
  if (!tok.empty() && !apply(tok)) return std::nullopt;
  return p;
}

std::string to_string(CachePolicy c) {
  switch (c) {
    case CachePolicy::Normal: return "normal";
    case CachePolicy::NormalCoherent: return "normal_coherent";
    case CachePolicy::Io: return "io";
    case CachePolicy::WriteThrough: return "write_through";
    case CachePolicy::Uncached: return "uncached";
  }
  return "?";
}

std::optional<CachePolicy> cache_policy_from_string(const std::string& s) {
  if (s == "normal") return CachePolicy::Normal;
  if (s == "normal_coherent" || s == "normal+coherent") return CachePolicy::NormalCoherent;
  if (s == "io") return CachePolicy::Io;
  if (s == "write_through") return CachePolicy::WriteThrough;
  if (s == "uncached") return CachePolicy::Uncached;
  return std::nullopt;
}

std::string to_string(const Owner& o) {
  return o.is_kernel() ? "kernel" : "partition:" + o.partition_name;
}

std::optional<Owner> owner_from_string(const std::string& s) {
  if (s == "kernel") return Owner::kernel();
  if (s.rfind("partition:", 0) == 0) {
    std::string name = s.substr(10);
    if (name.empty() || name == "kernel") return std::nullopt;
    for (char c : name)
      if (!(isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.'))
        return std::nullopt;
    return Owner::partition(name);
  }
  return std::nullopt;
}

std::string to_string(RegionClass c) {
  switch (c) {
    case RegionClass::ExternalRam: return "external_ram";
    case RegionClass::InternalRam: return "internal_ram";
    case RegionClass::Device: return "device";
  }
  return "?";
}

std::optional<RegionClass> region_class_from_string(const std::string& s) {
  if (s == "external_ram") return RegionClass::ExternalRam;
  if (s == "internal_ram") return RegionClass::InternalRam;
  if (s == "device") return RegionClass::Device;
  return std::nullopt;
}

std::vector<Owner> partitions_of(const std::vector<MemoryBlockRequirement>& blocks) {
  std::vector<Owner> out;
  for (const auto& b : blocks) {
    if (b.owner.is_kernel()) continue;
    bool seen = false;
    for (const auto& o : out)
      if (o == b.owner) { seen = true; break; }
    if (!seen) out.push_back(b.owner);
  }
  return out;
}

}  // namespace memlayout

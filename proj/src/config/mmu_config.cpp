#include "config/mmu_config.hpp"

#include <fstream>

#include "core/error.hpp"

namespace memlayout {

MmuConfig MmuConfig::from_bytes(std::vector<std::uint8_t> bytes) {
  if (bytes.size() < 4) throw FormatError("artifact shorter than its magic");
  MmuConfig c;
  c.bytes = std::move(bytes);
  if (c.bytes[0] == 'M' && c.bytes[1] == 'L' && c.bytes[2] == 'T' && c.bytes[3] == 'C') {
    c.kind = MmuModel::Kind::TlbFixed;
    c.tlb_sequences = read_mltc(c.bytes);
  } else if (c.bytes[0] == 'M' && c.bytes[1] == 'L' && c.bytes[2] == 'P' &&
             c.bytes[3] == 'T') {
    c.kind = MmuModel::Kind::PageTable;
    c.pagetable = read_mlpt(c.bytes);
  } else {
    throw FormatError("unknown artifact magic");
  }
  return c;
}

MmuConfig MmuConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return from_bytes(std::move(bytes));
}

void MmuConfig::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out.flush()) throw Error(ErrorCode::Io, "failed writing " + path);
}

GeneratedConfig generate_config(const MemoryLayout& layout) {
  GeneratedConfig out;
  if (layout.mmu.is_tlb()) {
    auto sequences = build_sequences(layout);
    out.config = MmuConfig::from_bytes(write_mltc(sequences));
    out.manifest = mltc_manifest(sequences, layout);
  } else {
    auto set = build_page_tables(layout);
    auto warmups = generate_warmup(layout, set);
    out.config = MmuConfig::from_bytes(write_mlpt(set, warmups, layout));
    out.manifest = mlpt_manifest(set, warmups, layout);
  }
  return out;
}

}  // namespace memlayout

#include "clmx/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "clmx/errors.hpp"

namespace clmx {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'M', 'X'};

// All multi-byte values little-endian. Layout:
//   magic "CLMX"
//   u32 format_version
//   u32 metadata length, JSON metadata text
//   per tensor: u32 name length, name bytes, u32 rank, u64 dims...,
//               row-major IEEE-754 binary32 values
// This build targets little-endian hosts only.
static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename T>
void write_pod(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw TruncatedFile("unexpected end of checkpoint file");
    return v;
}

std::string read_bytes(std::istream& in, std::size_t n) {
    std::string s(n, '\0');
    in.read(s.data(), static_cast<std::streamsize>(n));
    if (!in) throw TruncatedFile("unexpected end of checkpoint file");
    return s;
}

}  // namespace

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write checkpoint: " + path.string());

    out.write(kMagic, 4);
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.format_version));

    nlohmann::json meta = {
        {"id", ckpt.id},
        {"arch", {ckpt.params.arch.vocab, ckpt.params.arch.embed, ckpt.params.arch.hidden}},
        {"vocab_hash", ckpt.vocab_hash},
        {"provenance",
         {{"trained_on", ckpt.provenance.trained_on},
          {"transferred_from", ckpt.provenance.transferred_from},
          {"transfer_depth", ckpt.provenance.transfer_depth},
          {"epochs", ckpt.provenance.epochs},
          {"final_dev_ppl", ckpt.provenance.final_dev_ppl}}},
    };
    std::string meta_text = meta.dump();
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(meta_text.size()));
    out.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));

    for (const NamedTensor& nt : ckpt.params.tensors()) {
        write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(nt.name.size()));
        out.write(nt.name.data(), static_cast<std::streamsize>(nt.name.size()));
        write_pod<std::uint32_t>(out, 2u);
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(nt.tensor->rows));
        write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(nt.tensor->cols));
        for (double x : nt.tensor->v) write_pod<float>(out, static_cast<float>(x));
    }
    if (!out) throw Error("write failed: " + path.string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read checkpoint: " + path.string());

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("not a checkpoint file: " + path.string());
    }
    auto version = read_pod<std::uint32_t>(in);
    if (version != static_cast<std::uint32_t>(kCheckpointFormatVersion)) {
        throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    }

    auto meta_len = read_pod<std::uint32_t>(in);
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_bytes(in, meta_len));
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("bad checkpoint metadata: ") + e.what());
    }

    ModelCheckpoint ckpt;
    ckpt.format_version = static_cast<int>(version);
    ckpt.id = meta.at("id").get<std::string>();
    ckpt.vocab_hash = meta.at("vocab_hash").get<std::string>();
    auto arch_dims = meta.at("arch").get<std::vector<int>>();
    if (arch_dims.size() != 3) throw FormatError("bad arch metadata");
    Arch arch{arch_dims[0], arch_dims[1], arch_dims[2]};
    const auto& prov = meta.at("provenance");
    ckpt.provenance.trained_on = prov.at("trained_on").get<std::vector<std::string>>();
    ckpt.provenance.transferred_from = prov.at("transferred_from").get<std::string>();
    ckpt.provenance.transfer_depth = prov.at("transfer_depth").get<int>();
    ckpt.provenance.epochs = prov.at("epochs").get<int>();
    ckpt.provenance.final_dev_ppl = prov.at("final_dev_ppl").get<double>();

    ckpt.params = ModelParams(arch);
    for (NamedTensor nt : ckpt.params.tensors()) {
        auto name_len = read_pod<std::uint32_t>(in);
        std::string name = read_bytes(in, name_len);
        if (name != nt.name) {
            throw FormatError("unexpected tensor '" + name + "', wanted '" + nt.name + "'");
        }
        auto rank = read_pod<std::uint32_t>(in);
        if (rank != 2) throw FormatError("unexpected tensor rank for " + name);
        auto rows = read_pod<std::uint64_t>(in);
        auto cols = read_pod<std::uint64_t>(in);
        if (rows != static_cast<std::uint64_t>(nt.tensor->rows) ||
            cols != static_cast<std::uint64_t>(nt.tensor->cols)) {
            throw FormatError("tensor shape mismatch for " + name);
        }
        for (double& x : nt.tensor->v) x = static_cast<double>(read_pod<float>(in));
    }
    return ckpt;
}

}  // namespace clmx

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpolab/model.hpp"

namespace cpolab {

namespace {

using nlohmann::json;

void write_u32_le(std::ostream& out, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    out.write(b, 4);
}

std::uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) fail(ErrorKind::parse, "checkpoint header is corrupt (short length field)");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_floats_le(std::ostream& out, const MatF& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            std::uint32_t bits;
            const float v = m(i, j);
            std::memcpy(&bits, &v, 4);
            write_u32_le(out, bits);
        }
    }
}

void read_floats_le(std::istream& in, MatF& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            unsigned char b[4];
            in.read(reinterpret_cast<char*>(b), 4);
            if (!in) fail(ErrorKind::parse, "checkpoint payload is truncated");
            std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                                 (static_cast<std::uint32_t>(b[1]) << 8) |
                                 (static_cast<std::uint32_t>(b[2]) << 16) |
                                 (static_cast<std::uint32_t>(b[3]) << 24);
            float v;
            std::memcpy(&v, &bits, 4);
            m(i, j) = v;
        }
    }
}

json arch_to_json(const CbmArchitecture& arch) {
    return json{{"input_dim", arch.input_dim},
                {"encoder_hidden", arch.encoder_hidden},
                {"num_concepts", arch.num_concepts},
                {"num_classes", arch.num_classes},
                {"concept_groups", arch.concept_groups}};
}

CbmArchitecture arch_from_json(const json& j) {
    CbmArchitecture arch;
    arch.input_dim = j.at("input_dim").get<int>();
    arch.encoder_hidden = j.at("encoder_hidden").get<std::vector<int>>();
    arch.num_concepts = j.at("num_concepts").get<int>();
    arch.num_classes = j.at("num_classes").get<int>();
    arch.concept_groups = j.at("concept_groups").get<std::vector<std::vector<int>>>();
    return arch;
}

}  // namespace

void save_checkpoint(const std::string& path, const CbmArchitecture& arch,
                     const CbmParameters<float>& params, const CheckpointMeta& meta) {
    arch.validate();
    if (!params.all_finite()) fail(ErrorKind::numeric, "refusing to save non-finite parameters");
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot open '" + path + "' for writing");

    json header{{"arch", arch_to_json(arch)},
                {"meta", {{"seed", meta.seed}, {"objective", meta.objective}, {"epoch", meta.epoch}}}};
    const std::string header_str = header.dump();

    out.write(kCheckpointMagic, 4);
    const char version = static_cast<char>(kCheckpointVersion);
    out.write(&version, 1);
    write_u32_le(out, static_cast<std::uint32_t>(header_str.size()));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));
    for (const auto* m : params.flat()) write_floats_le(out, *m);
    if (!out) fail(ErrorKind::io, "write to '" + path + "' failed");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open '" + path + "' for reading");

    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
        fail(ErrorKind::parse, "checkpoint header is corrupt (bad magic)");
    char version;
    in.read(&version, 1);
    if (!in) fail(ErrorKind::parse, "checkpoint header is corrupt (missing version)");
    if (static_cast<std::uint8_t>(version) != kCheckpointVersion)
        fail(ErrorKind::parse, "checkpoint version mismatch: file has " +
                                   std::to_string(static_cast<int>(version)) + ", expected " +
                                   std::to_string(static_cast<int>(kCheckpointVersion)));
    const std::uint32_t header_len = read_u32_le(in);
    std::string header_str(header_len, '\0');
    in.read(header_str.data(), header_len);
    if (!in) fail(ErrorKind::parse, "checkpoint header is corrupt (short descriptor)");

    LoadedCheckpoint ck;
    try {
        const json header = json::parse(header_str);
        ck.arch = arch_from_json(header.at("arch"));
        const json& meta = header.at("meta");
        ck.meta.seed = meta.at("seed").get<std::uint64_t>();
        ck.meta.objective = meta.at("objective").get<std::string>();
        ck.meta.epoch = meta.at("epoch").get<int>();
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, std::string("checkpoint header is corrupt: ") + e.what());
    }
    ck.arch.validate();

    int in_dim = ck.arch.input_dim;
    for (int width : ck.arch.encoder_hidden) {
        DenseLayer<float> l{MatF(in_dim, width), MatF(1, width)};
        read_floats_le(in, l.weight);
        read_floats_le(in, l.bias);
        ck.params.encoder.push_back(std::move(l));
        in_dim = width;
    }
    ck.params.concept_head = {MatF(in_dim, ck.arch.num_concepts), MatF(1, ck.arch.num_concepts)};
    read_floats_le(in, ck.params.concept_head.weight);
    read_floats_le(in, ck.params.concept_head.bias);
    ck.params.task_head = {MatF(ck.arch.num_concepts, ck.arch.num_classes),
                           MatF(1, ck.arch.num_classes)};
    read_floats_le(in, ck.params.task_head.weight);
    read_floats_le(in, ck.params.task_head.bias);

    char extra;
    if (in.read(&extra, 1))
        fail(ErrorKind::parse, "checkpoint payload has trailing bytes");
    return ck;
}

LoadedCheckpoint load_checkpoint(const std::string& path, const CbmArchitecture& expected) {
    LoadedCheckpoint ck = load_checkpoint(path);
    if (!(ck.arch == expected))
        fail(ErrorKind::config, "checkpoint architecture mismatch: file has '" +
                                    ck.arch.descriptor() + "', expected '" + expected.descriptor() +
                                    "'");
    return ck;
}

}  // namespace cpolab

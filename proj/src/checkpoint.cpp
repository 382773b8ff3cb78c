#include "longdiff/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

#include <nlohmann/json.hpp>

#include "longdiff/errors.hpp"

namespace longdiff {

using json = nlohmann::json;

void Checkpoint::add(const std::string& name, const Tensor& t) {
    if (tensors.count(name)) throw std::invalid_argument("duplicate tensor: " + name);
    names.push_back(name);
    tensors.emplace(name, t);
}

const Tensor& Checkpoint::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw data_error("checkpoint tensor missing: " + name);
    return it->second;
}

bool Checkpoint::has(const std::string& name) const { return tensors.count(name) > 0; }

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { if (f) std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_u16(std::FILE* f, std::uint16_t v) {
    unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>(v >> 8)};
    std::fwrite(b, 1, 2, f);
}

void put_u32(std::FILE* f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 4, f);
}

void put_u64(std::FILE* f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    std::fwrite(b, 1, 8, f);
}

void put_f64(std::FILE* f, double v) { put_u64(f, std::bit_cast<std::uint64_t>(v)); }

bool get_bytes(std::FILE* f, void* dst, std::size_t n) {
    return std::fread(dst, 1, n, f) == n;
}

bool get_u16(std::FILE* f, std::uint16_t& v) {
    unsigned char b[2];
    if (!get_bytes(f, b, 2)) return false;
    v = static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    return true;
}

bool get_u32(std::FILE* f, std::uint32_t& v) {
    unsigned char b[4];
    if (!get_bytes(f, b, 4)) return false;
    v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return true;
}

bool get_u64(std::FILE* f, std::uint64_t& v) {
    unsigned char b[8];
    if (!get_bytes(f, b, 8)) return false;
    v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return true;
}

bool get_f64(std::FILE* f, double& v) {
    std::uint64_t bits;
    if (!get_u64(f, bits)) return false;
    v = std::bit_cast<double>(bits);
    return true;
}

json meta_to_json(const CheckpointMeta& m) {
    return json{
        {"base_channels", m.config.base_channels},
        {"channel_multipliers", m.config.channel_multipliers},
        {"attention_levels", std::vector<int>(m.config.attention_levels.begin(),
                                              m.config.attention_levels.end())},
        {"time_embed_dim", m.config.time_embed_dim},
        {"delta_embed_dim", m.config.delta_embed_dim},
        {"norm_groups", m.config.norm_groups},
        {"schedule_steps", m.schedule_steps},
        {"beta_start", m.beta_start},
        {"beta_end", m.beta_end},
        {"iteration", m.iteration},
    };
}

CheckpointMeta meta_from_json(const json& j) {
    CheckpointMeta m;
    m.config.base_channels = j.at("base_channels").get<int>();
    m.config.channel_multipliers = j.at("channel_multipliers").get<std::vector<int>>();
    const auto levels = j.at("attention_levels").get<std::vector<int>>();
    m.config.attention_levels.clear();
    m.config.attention_levels.insert(levels.begin(), levels.end());
    m.config.time_embed_dim = j.at("time_embed_dim").get<int>();
    m.config.delta_embed_dim = j.at("delta_embed_dim").get<int>();
    m.config.norm_groups = j.at("norm_groups").get<int>();
    m.schedule_steps = j.at("schedule_steps").get<int>();
    m.beta_start = j.at("beta_start").get<double>();
    m.beta_end = j.at("beta_end").get<double>();
    m.iteration = j.at("iteration").get<std::int64_t>();
    return m;
}

}  // namespace

void write_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw data_error("cannot open for writing: " + path);
    std::fwrite("LDCK", 1, 4, f.get());
    put_u16(f.get(), kCheckpointFormatVersion);

    const std::string meta = meta_to_json(ckpt.meta).dump();
    put_u32(f.get(), static_cast<std::uint32_t>(meta.size()));
    std::fwrite(meta.data(), 1, meta.size(), f.get());

    put_u32(f.get(), static_cast<std::uint32_t>(ckpt.names.size()));
    for (const std::string& name : ckpt.names) {
        const Tensor& t = ckpt.tensors.at(name);
        put_u16(f.get(), static_cast<std::uint16_t>(name.size()));
        std::fwrite(name.data(), 1, name.size(), f.get());
        std::fputc(static_cast<int>(t.shape.size()), f.get());
        for (int d : t.shape) put_u32(f.get(), static_cast<std::uint32_t>(d));
        for (double v : t.data) put_f64(f.get(), v);
    }
    if (std::ferror(f.get())) throw data_error("write failed: " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw data_error("cannot open for reading: " + path);

    char magic[4];
    if (!get_bytes(f.get(), magic, 4)) throw truncated_error(path + ": missing magic bytes");
    if (std::memcmp(magic, "LDCK", 4) != 0) {
        throw format_error(path + ": not a checkpoint file");
    }
    std::uint16_t version;
    if (!get_u16(f.get(), version)) throw truncated_error(path + ": truncated header");
    if (version != kCheckpointFormatVersion) {
        throw version_error(path + ": checkpoint version " + std::to_string(version) +
                            ", expected " + std::to_string(kCheckpointFormatVersion));
    }

    std::uint32_t meta_len;
    if (!get_u32(f.get(), meta_len)) throw truncated_error(path + ": truncated header");
    std::string meta_str(meta_len, '\0');
    if (!get_bytes(f.get(), meta_str.data(), meta_len)) {
        throw truncated_error(path + ": truncated metadata");
    }

    Checkpoint ckpt;
    try {
        ckpt.meta = meta_from_json(json::parse(meta_str));
    } catch (const json::exception& e) {
        throw format_error(path + ": bad metadata: " + e.what());
    }

    std::uint32_t count;
    if (!get_u32(f.get(), count)) throw truncated_error(path + ": truncated tensor table");
    for (std::uint32_t i = 0; i < count; ++i) {
        std::uint16_t name_len;
        if (!get_u16(f.get(), name_len)) throw truncated_error(path + ": truncated tensor name");
        std::string name(name_len, '\0');
        if (!get_bytes(f.get(), name.data(), name_len)) {
            throw truncated_error(path + ": truncated tensor name");
        }
        const int rank = std::fgetc(f.get());
        if (rank == EOF) throw truncated_error(path + ": truncated tensor rank");
        std::vector<int> shape(static_cast<std::size_t>(rank));
        for (int& d : shape) {
            std::uint32_t dim;
            if (!get_u32(f.get(), dim)) throw truncated_error(path + ": truncated dims");
            d = static_cast<int>(dim);
        }
        Tensor t(shape);
        for (double& v : t.data) {
            if (!get_f64(f.get(), v)) {
                throw truncated_error(path + ": truncated payload in tensor " + name);
            }
        }
        ckpt.add(name, t);
    }
    return ckpt;
}

}  // namespace longdiff

#include "amsdb/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <map>

#include <json.hpp>

#include "amsdb/fsio.hpp"

namespace amsdb {

namespace {

using json = nlohmann::json;

constexpr char kMagic[6] = {'A', 'M', 'S', 'D', 'B', '\0'};
constexpr std::uint32_t kVersion = 1;

void put_u8(std::string& s, std::uint8_t v) {
    s.push_back(static_cast<char>(v));
}

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& s, std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
        s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void need(const std::string& s, size_t pos, size_t n,
          const std::string& path) {
    if (pos + n > s.size())
        throw DataError(path + ": truncated checkpoint");
}

std::uint8_t get_u8(const std::string& s, size_t& pos,
                    const std::string& path) {
    need(s, pos, 1, path);
    return static_cast<std::uint8_t>(s[pos++]);
}

std::uint32_t get_u32(const std::string& s, size_t& pos,
                      const std::string& path) {
    need(s, pos, 4, path);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(s[pos++]))
             << (8 * i);
    return v;
}

std::uint64_t get_u64(const std::string& s, size_t& pos,
                      const std::string& path) {
    need(s, pos, 8, path);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(s[pos++]))
             << (8 * i);
    return v;
}

std::uint32_t crc_of(const std::vector<float>& data) {
    uLong crc = crc32(0L, Z_NULL, 0);
    const auto* bytes = reinterpret_cast<const Bytef*>(data.data());
    size_t left = data.size() * sizeof(float);
    while (left > 0) {
        const uInt chunk =
            static_cast<uInt>(std::min<size_t>(left, 1u << 30));
        crc = crc32(crc, bytes, chunk);
        bytes += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

json config_to_json(const ModelConfig& cfg) {
    return json{{"in_channels", cfg.in_channels},
                {"dims", cfg.dims},
                {"depths", cfg.depths},
                {"state_dim", cfg.state_dim},
                {"expand", cfg.expand},
                {"patch_embed", cfg.patch_embed},
                {"skip_mode", skip_mode_name(cfg.skip_mode)},
                {"dog_scales", cfg.dog_scales},
                {"dog_sigma0", cfg.dog_sigma0}};
}

ModelConfig config_from_json(const json& j) {
    ModelConfig cfg;
    cfg.in_channels = j.at("in_channels").get<i64>();
    cfg.dims = j.at("dims").get<std::vector<i64>>();
    cfg.depths = j.at("depths").get<std::vector<i64>>();
    cfg.state_dim = j.at("state_dim").get<i64>();
    cfg.expand = j.at("expand").get<i64>();
    cfg.patch_embed = j.at("patch_embed").get<i64>();
    cfg.skip_mode = skip_mode_from_name(j.at("skip_mode").get<std::string>());
    cfg.dog_scales = j.at("dog_scales").get<int>();
    cfg.dog_sigma0 = j.at("dog_sigma0").get<float>();
    return cfg;
}

}  // namespace

Checkpoint checkpoint_from_model(const Model& model, i64 step,
                                 std::uint64_t seed, const Adam* adam) {
    Checkpoint ck;
    ck.config = model.config();
    ck.step = step;
    ck.seed = seed;
    const auto named = model.named_parameters();
    for (const auto& [name, t] : named)
        ck.arrays.push_back({0, name, t.shape(), t.value()});
    if (adam != nullptr) {
        if (adam->params().size() != named.size())
            throw ValueError("optimizer does not track the model parameters");
        ck.has_adam = true;
        ck.adam_step = adam->step_count();
        for (size_t i = 0; i < named.size(); ++i) {
            ck.arrays.push_back({1, named[i].first, named[i].second.shape(),
                                 adam->m_state()[i]});
            ck.arrays.push_back({2, named[i].first, named[i].second.shape(),
                                 adam->v_state()[i]});
        }
    }
    return ck;
}

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json j{{"config", config_to_json(ck.config)},
           {"step", ck.step},
           {"seed", ck.seed}};
    if (ck.has_adam) j["adam_step"] = ck.adam_step;
    const std::string cfg = j.dump();

    std::string out(kMagic, sizeof(kMagic));
    put_u32(out, kVersion);
    put_u64(out, cfg.size());
    out += cfg;
    put_u64(out, ck.arrays.size());
    std::uint64_t offset = 0;
    for (const auto& a : ck.arrays) {
        const std::uint64_t bytes = a.data.size() * sizeof(float);
        if (a.data.size() != static_cast<size_t>(::amsdb::numel(a.shape)))
            throw ValueError("checkpoint array '" + a.name +
                             "' payload does not match its shape");
        put_u8(out, a.kind);
        put_u32(out, static_cast<std::uint32_t>(a.name.size()));
        out += a.name;
        put_u8(out, static_cast<std::uint8_t>(a.shape.size()));
        for (i64 d : a.shape) put_u64(out, static_cast<std::uint64_t>(d));
        put_u64(out, offset);
        put_u64(out, bytes);
        put_u32(out, crc_of(a.data));
        offset += bytes;
    }
    put_u64(out, offset);
    for (const auto& a : ck.arrays)
        for (float f : a.data) put_u32(out, std::bit_cast<std::uint32_t>(f));
    atomic_write_file(path, out);
}

Checkpoint load_checkpoint(const std::string& path) {
    const std::string s = read_file(path);
    size_t pos = 0;
    need(s, pos, sizeof(kMagic), path);
    if (std::memcmp(s.data(), kMagic, sizeof(kMagic)) != 0)
        throw DataError(path + ": not a checkpoint file");
    pos += sizeof(kMagic);
    const std::uint32_t version = get_u32(s, pos, path);
    if (version != kVersion)
        throw DataError(path + ": unsupported checkpoint version " +
                        std::to_string(version) + " (expected " +
                        std::to_string(kVersion) + ")");
    const std::uint64_t cfg_len = get_u64(s, pos, path);
    need(s, pos, cfg_len, path);
    json j;
    Checkpoint ck;
    try {
        j = json::parse(s.substr(pos, cfg_len));
        ck.config = config_from_json(j.at("config"));
        ck.step = j.at("step").get<i64>();
        ck.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("adam_step")) {
            ck.has_adam = true;
            ck.adam_step = j.at("adam_step").get<i64>();
        }
    } catch (const json::exception& e) {
        throw DataError(path + ": malformed checkpoint config: " + e.what());
    } catch (const ConfigError& e) {
        throw DataError(path + ": malformed checkpoint config: " + e.what());
    }
    pos += cfg_len;

    const std::uint64_t count = get_u64(s, pos, path);
    struct Entry {
        std::uint8_t kind;
        std::string name;
        Shape shape;
        std::uint64_t offset, bytes;
        std::uint32_t crc;
    };
    std::vector<Entry> entries;
    entries.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        Entry e;
        e.kind = get_u8(s, pos, path);
        if (e.kind > 2)
            throw DataError(path + ": unknown array kind " +
                            std::to_string(e.kind));
        const std::uint32_t name_len = get_u32(s, pos, path);
        need(s, pos, name_len, path);
        e.name = s.substr(pos, name_len);
        pos += name_len;
        const std::uint8_t ndim = get_u8(s, pos, path);
        std::uint64_t n = 1;
        for (std::uint8_t d = 0; d < ndim; ++d) {
            const std::uint64_t dim = get_u64(s, pos, path);
            e.shape.push_back(static_cast<i64>(dim));
            n *= dim;
        }
        e.offset = get_u64(s, pos, path);
        e.bytes = get_u64(s, pos, path);
        if (e.bytes != n * sizeof(float))
            throw DataError(path + ": array '" + e.name +
                            "' payload length does not match its shape");
        e.crc = get_u32(s, pos, path);
        entries.push_back(std::move(e));
    }
    const std::uint64_t payload_total = get_u64(s, pos, path);
    need(s, pos, payload_total, path);
    const size_t payload_start = pos;

    for (auto& e : entries) {
        if (e.offset + e.bytes > payload_total)
            throw DataError(path + ": array '" + e.name +
                            "' extends past the payload");
        CheckpointArray a;
        a.kind = e.kind;
        a.name = std::move(e.name);
        a.shape = std::move(e.shape);
        a.data.resize(e.bytes / sizeof(float));
        for (size_t i = 0; i < a.data.size(); ++i) {
            size_t p = payload_start + e.offset + i * 4;
            a.data[i] = std::bit_cast<float>(get_u32(s, p, path));
        }
        if (crc_of(a.data) != e.crc)
            throw DataError(path + ": checksum mismatch in array '" + a.name +
                            "'");
        ck.arrays.push_back(std::move(a));
    }
    return ck;
}

void apply_to_model(const Checkpoint& ck, Model& model) {
    std::map<std::string, const CheckpointArray*> by_name;
    for (const auto& a : ck.arrays)
        if (a.kind == 0) {
            if (!by_name.emplace(a.name, &a).second)
                throw DataError("checkpoint has parameter '" + a.name +
                                "' more than once");
        }
    const auto named = model.named_parameters();
    std::string missing;
    for (const auto& [name, t] : named) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            missing += (missing.empty() ? "" : ", ") + name;
            continue;
        }
        if (it->second->shape != t.shape())
            throw DataError("checkpoint parameter '" + name + "' has shape " +
                            shape_str(it->second->shape) +
                            ", model expects " + shape_str(t.shape()));
        by_name.erase(it);
    }
    if (!missing.empty())
        throw DataError("checkpoint is missing parameters: " + missing);
    if (!by_name.empty()) {
        std::string extra;
        for (const auto& [name, a] : by_name)
            extra += (extra.empty() ? "" : ", ") + name;
        throw DataError("checkpoint has parameters unknown to the model: " +
                        extra);
    }
    std::map<std::string, const CheckpointArray*> again;
    for (const auto& a : ck.arrays)
        if (a.kind == 0) again.emplace(a.name, &a);
    for (auto& [name, t] : named) {
        const CheckpointArray* a = again.at(name);
        Tensor dst = t;
        std::memcpy(dst.data(), a->data.data(),
                    a->data.size() * sizeof(float));
    }
}

void apply_to_adam(const Checkpoint& ck, Adam& adam, const Model& model) {
    if (!ck.has_adam)
        throw DataError("checkpoint carries no optimizer state");
    std::map<std::string, const CheckpointArray*> ms, vs;
    for (const auto& a : ck.arrays) {
        if (a.kind == 1) ms.emplace(a.name, &a);
        if (a.kind == 2) vs.emplace(a.name, &a);
    }
    const auto named = model.named_parameters();
    std::vector<std::vector<float>> m, v;
    for (const auto& [name, t] : named) {
        auto mi = ms.find(name), vi = vs.find(name);
        if (mi == ms.end() || vi == vs.end())
            throw DataError("checkpoint optimizer state is missing '" + name +
                            "'");
        m.push_back(mi->second->data);
        v.push_back(vi->second->data);
    }
    adam.restore(ck.adam_step, std::move(m), std::move(v));
}

}  // namespace amsdb

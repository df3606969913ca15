#include "latencut/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

namespace latencut {

static_assert(std::endian::native == std::endian::little,
              "weight container I/O assumes a little-endian host");

namespace {
constexpr char kMagic[4] = {'L', 'A', 'T', 'X'};
constexpr uint32_t kVersion = 1;
constexpr size_t kAlign = 64;

size_t align_up(size_t n) { return (n + kAlign - 1) / kAlign * kAlign; }
} // namespace

// ---------------------------------------------------------------- config

const char* to_string(Mode m) { return m == Mode::encoder ? "encoder" : "decoder"; }

Mode mode_from_string(const std::string& s) {
    if (s == "encoder") return Mode::encoder;
    if (s == "decoder") return Mode::decoder;
    throw std::invalid_argument("mode must be \"encoder\" or \"decoder\", got \"" + s + "\"");
}

void ModelConfig::validate() const {
    auto positive = [](int v, const char* name) {
        if (v < 1)
            throw std::invalid_argument(std::string(name) + " must be >= 1, got " +
                                        std::to_string(v));
    };
    positive(num_layers, "num_layers");
    positive(hidden_size, "hidden_size");
    positive(num_heads, "num_heads");
    positive(intermediate_size, "intermediate_size");
    positive(max_seq, "max_seq");
    positive(vocab_size, "vocab_size");
    positive(num_labels, "num_labels");
    if (hidden_size % num_heads != 0)
        throw std::invalid_argument("hidden_size " + std::to_string(hidden_size) +
                                    " not divisible by num_heads " + std::to_string(num_heads));
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.num_layers = j.at("num_layers").get<int>();
    c.hidden_size = j.at("hidden_size").get<int>();
    c.num_heads = j.at("num_heads").get<int>();
    c.intermediate_size = j.value("intermediate_size", 4 * c.hidden_size);
    c.max_seq = j.value("max_seq", c.max_seq);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.num_labels = j.value("num_labels", c.num_labels);
    c.mode = mode_from_string(j.value("mode", "encoder"));
    c.validate();
    return c;
}

nlohmann::json config_to_json(const ModelConfig& c) {
    return {{"num_layers", c.num_layers},
            {"hidden_size", c.hidden_size},
            {"num_heads", c.num_heads},
            {"intermediate_size", c.intermediate_size},
            {"max_seq", c.max_seq},
            {"vocab_size", c.vocab_size},
            {"num_labels", c.num_labels},
            {"mode", to_string(c.mode)}};
}

ModelConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("config file " + path + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

// ---------------------------------------------------------------- layout

size_t TensorSpec::count() const {
    size_t n = 1;
    for (int d : dims) n *= static_cast<size_t>(d);
    return n;
}

std::vector<TensorSpec> expected_tensors(const ModelConfig& c) {
    const int h = c.hidden_size, i = c.intermediate_size;
    std::vector<TensorSpec> t;
    t.push_back({"embed.word", {c.vocab_size, h}});
    t.push_back({"embed.pos", {c.max_seq, h}});
    t.push_back({"embed.ln.g", {h}});
    t.push_back({"embed.ln.b", {h}});
    for (int l = 0; l < c.num_layers; ++l) {
        const std::string p = "enc." + std::to_string(l) + ".";
        for (const char* part : {"q", "k", "v", "o"}) {
            t.push_back({p + "att." + part + ".w", {h, h}});
            t.push_back({p + "att." + part + ".b", {h}});
        }
        t.push_back({p + "ln1.g", {h}});
        t.push_back({p + "ln1.b", {h}});
        t.push_back({p + "ffn.w1", {i, h}});
        t.push_back({p + "ffn.b1", {i}});
        t.push_back({p + "ffn.w2", {h, i}});
        t.push_back({p + "ffn.b2", {h}});
        t.push_back({p + "ln2.g", {h}});
        t.push_back({p + "ln2.b", {h}});
    }
    t.push_back({"pooler.w", {h, h}});
    t.push_back({"pooler.b", {h}});
    t.push_back({"cls.w", {c.num_labels, h}});
    t.push_back({"cls.b", {c.num_labels}});
    if (c.mode == Mode::decoder)
        t.push_back({"lm_head.w", {c.vocab_size, h}, /*optional=*/true});
    return t;
}

const Matrix& WeightStore::get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("no tensor named \"" + name + "\" in store");
    return it->second;
}

Matrix& WeightStore::get(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::out_of_range("no tensor named \"" + name + "\" in store");
    return it->second;
}

// ---------------------------------------------------------------- save

const char* to_string(ModelIoStatus s) {
    switch (s) {
    case ModelIoStatus::io_error: return "io error";
    case ModelIoStatus::bad_magic: return "bad magic";
    case ModelIoStatus::version_mismatch: return "version mismatch";
    case ModelIoStatus::bad_header: return "bad header";
    case ModelIoStatus::missing_tensor: return "missing tensor";
    case ModelIoStatus::shape_mismatch: return "shape mismatch";
    case ModelIoStatus::truncated: return "truncated";
    }
    return "unknown";
}

namespace {

// Shape a store entry must have for a given spec (1-D specs are 1×n in memory).
bool store_shape_ok(const TensorSpec& spec, const Matrix& m) {
    if (spec.dims.size() == 1) return m.rows == 1 && m.cols == spec.dims[0];
    return m.rows == spec.dims[0] && m.cols == spec.dims[1];
}

std::string dims_to_string(const std::vector<int>& dims) {
    std::string s = "[";
    for (size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
    return s + "]";
}

} // namespace

void save_model(const ModelConfig& config, const WeightStore& store, const std::string& path) {
    config.validate();
    const auto specs = expected_tensors(config);

    // Validate completeness and shapes against the layout contract.
    std::vector<const TensorSpec*> to_write;
    for (const auto& spec : specs) {
        if (!store.has(spec.name)) {
            if (spec.optional) continue;
            throw ModelIoError(ModelIoStatus::missing_tensor,
                               "store lacks required tensor \"" + spec.name + "\"");
        }
        if (!store_shape_ok(spec, store.get(spec.name)))
            throw ModelIoError(ModelIoStatus::shape_mismatch,
                               "tensor \"" + spec.name + "\" must have shape " +
                                   dims_to_string(spec.dims));
        to_write.push_back(&spec);
    }
    for (const auto& [name, m] : store.tensors) {
        bool known = false;
        for (const auto& spec : specs) known = known || spec.name == name;
        if (!known)
            throw ModelIoError(ModelIoStatus::bad_header,
                               "store holds tensor \"" + name + "\" not in the layout contract");
    }

    // Offsets are relative to the data section and 64-byte aligned.
    nlohmann::json tensors = nlohmann::json::array();
    size_t offset = 0;
    for (const auto* spec : to_write) {
        tensors.push_back({{"name", spec->name},
                           {"shape", spec->dims},
                           {"dtype", "f32"},
                           {"offset", offset}});
        offset = align_up(offset + spec->count() * sizeof(float));
    }
    const nlohmann::json header = {{"config", config_to_json(config)}, {"tensors", tensors}};
    const std::string header_str = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ModelIoError(ModelIoStatus::io_error, "cannot open for writing: " + path);
    out.write(kMagic, 4);
    uint32_t version = kVersion;
    uint64_t header_len = header_str.size();
    out.write(reinterpret_cast<const char*>(&version), sizeof(version));
    out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
    out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

    const size_t data_base = align_up(16 + header_str.size());
    std::vector<char> pad(kAlign, 0);
    size_t pos = 16 + header_str.size();
    auto pad_to = [&](size_t target) {
        while (pos < target) {
            const size_t n = std::min(target - pos, pad.size());
            out.write(pad.data(), static_cast<std::streamsize>(n));
            pos += n;
        }
    };
    pad_to(data_base);
    size_t expect = 0;
    for (const auto* spec : to_write) {
        pad_to(data_base + expect);
        const Matrix& m = store.get(spec->name);
        out.write(reinterpret_cast<const char*>(m.data.data()),
                  static_cast<std::streamsize>(m.data.size() * sizeof(float)));
        pos += m.data.size() * sizeof(float);
        expect = align_up(expect + m.data.size() * sizeof(float));
    }
    out.flush();
    if (!out) throw ModelIoError(ModelIoStatus::io_error, "write failed: " + path);
}

// ---------------------------------------------------------------- load

Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ModelIoError(ModelIoStatus::io_error, "cannot open: " + path);
    in.seekg(0, std::ios::end);
    const uint64_t file_size = static_cast<uint64_t>(in.tellg());
    in.seekg(0);

    char magic[4];
    if (file_size < 4 || !in.read(magic, 4))
        throw ModelIoError(ModelIoStatus::truncated, "file shorter than magic: " + path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw ModelIoError(ModelIoStatus::bad_magic,
                           "not a LATX weight file (magic bytes mismatch): " + path);

    uint32_t version = 0;
    uint64_t header_len = 0;
    if (file_size < 16 || !in.read(reinterpret_cast<char*>(&version), sizeof(version)) ||
        !in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len)))
        throw ModelIoError(ModelIoStatus::truncated, "file shorter than prologue: " + path);
    if (version != kVersion)
        throw ModelIoError(ModelIoStatus::version_mismatch,
                           "container version " + std::to_string(version) + ", expected " +
                               std::to_string(kVersion));
    if (16 + header_len > file_size)
        throw ModelIoError(ModelIoStatus::truncated, "header extends past end of file");

    std::string header_str(header_len, '\0');
    if (!in.read(header_str.data(), static_cast<std::streamsize>(header_len)))
        throw ModelIoError(ModelIoStatus::truncated, "header read failed");

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(header_str);
    } catch (const nlohmann::json::exception& e) {
        throw ModelIoError(ModelIoStatus::bad_header, std::string("header JSON: ") + e.what());
    }

    Model model;
    struct Entry {
        std::vector<int> shape;
        uint64_t offset;
    };
    std::map<std::string, Entry> file_entries;
    try {
        model.config = config_from_json(header.at("config"));
        for (const auto& t : header.at("tensors")) {
            Entry e;
            e.shape = t.at("shape").get<std::vector<int>>();
            e.offset = t.at("offset").get<uint64_t>();
            if (t.at("dtype").get<std::string>() != "f32")
                throw std::invalid_argument("tensor \"" + t.at("name").get<std::string>() +
                                            "\" has unsupported dtype");
            if (e.shape.empty() || e.shape.size() > 2)
                throw std::invalid_argument("tensor shape rank must be 1 or 2");
            if (e.offset % kAlign != 0)
                throw std::invalid_argument("tensor offset not 64-byte aligned");
            if (!file_entries.emplace(t.at("name").get<std::string>(), e).second)
                throw std::invalid_argument("duplicate tensor \"" +
                                            t.at("name").get<std::string>() + "\"");
        }
    } catch (const ModelIoError&) {
        throw;
    } catch (const std::exception& e) {
        throw ModelIoError(ModelIoStatus::bad_header, e.what());
    }

    const auto specs = expected_tensors(model.config);
    for (const auto& spec : specs) {
        auto it = file_entries.find(spec.name);
        if (it == file_entries.end()) {
            if (spec.optional) continue;
            throw ModelIoError(ModelIoStatus::missing_tensor,
                               "file lacks required tensor \"" + spec.name + "\"");
        }
        if (it->second.shape != spec.dims)
            throw ModelIoError(ModelIoStatus::shape_mismatch,
                               "tensor \"" + spec.name + "\" has shape " +
                                   dims_to_string(it->second.shape) + ", expected " +
                                   dims_to_string(spec.dims));
    }
    for (const auto& [name, e] : file_entries) {
        bool known = false;
        for (const auto& spec : specs) known = known || spec.name == name;
        if (!known)
            throw ModelIoError(ModelIoStatus::bad_header,
                               "file holds tensor \"" + name + "\" not in the layout contract");
    }

    const uint64_t data_base = align_up(16 + header_len);
    for (const auto& spec : specs) {
        auto it = file_entries.find(spec.name);
        if (it == file_entries.end()) continue;
        const Entry& e = it->second;
        const uint64_t bytes = spec.count() * sizeof(float);
        if (data_base + e.offset + bytes > file_size)
            throw ModelIoError(ModelIoStatus::truncated,
                               "tensor \"" + spec.name + "\" extends past end of file");
        Matrix m(e.shape.size() == 1 ? 1 : e.shape[0],
                 e.shape.size() == 1 ? e.shape[0] : e.shape[1]);
        in.seekg(static_cast<std::streamoff>(data_base + e.offset));
        if (!in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(bytes)))
            throw ModelIoError(ModelIoStatus::truncated,
                               "tensor \"" + spec.name + "\" read failed");
        model.weights.tensors.emplace(spec.name, std::move(m));
    }
    return model;
}

// ---------------------------------------------------------------- generate

WeightStore generate_random_model(const ModelConfig& config, uint64_t seed) {
    config.validate();
    WeightStore store;
    std::mt19937_64 rng(seed);
    for (const auto& spec : expected_tensors(config)) {
        if (spec.optional) continue; // decoder output embedding stays tied
        Matrix m(spec.dims.size() == 1 ? 1 : spec.dims[0],
                 spec.dims.size() == 1 ? spec.dims[0] : spec.dims[1]);
        for (auto& v : m.data) {
            // top 24 bits -> uniform [0,1), mapped to [-0.1, 0.1]
            const float u = static_cast<float>(rng() >> 40) * 0x1.0p-24f;
            v = -0.1f + 0.2f * u;
        }
        store.tensors.emplace(spec.name, std::move(m));
    }
    return store;
}

size_t parameter_count(const WeightStore& store) {
    size_t n = 0;
    for (const auto& [name, m] : store.tensors) n += m.data.size();
    return n;
}

} // namespace latencut

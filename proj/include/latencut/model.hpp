#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "latencut/tensor.hpp"

namespace latencut {

enum class Mode { encoder, decoder };

const char* to_string(Mode m);
Mode mode_from_string(const std::string& s);

// Architecture hyperparameters. Defaults describe the base 12-layer encoder
// the cost tables in the README are computed for.
struct ModelConfig {
    int num_layers = 12;
    int hidden_size = 768;
    int num_heads = 12;
    int intermediate_size = 3072; // 4 * hidden_size when absent from JSON
    int max_seq = 512;
    int vocab_size = 30522;
    int num_labels = 2;
    Mode mode = Mode::encoder;

    int head_dim() const { return hidden_size / num_heads; }
    void validate() const; // throws std::invalid_argument on bad combinations

    bool operator==(const ModelConfig&) const = default;
};

ModelConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig load_config_file(const std::string& path); // standalone *.json config

// One entry of the layout contract: tensor name plus expected dims
// ({n} for 1-D parameters, {rows, cols} for matrices).
struct TensorSpec {
    std::string name;
    std::vector<int> dims;
    bool optional = false;
    size_t count() const;
};

// Full tensor layout implied by a config, in canonical file order. The only
// optional entry is the decoder's `lm_head.w`; when absent the output
// embedding is tied to `embed.word`.
std::vector<TensorSpec> expected_tensors(const ModelConfig& c);

// Named tensor container. 1-D parameters are stored as 1×n matrices.
struct WeightStore {
    std::map<std::string, Matrix> tensors;

    bool has(const std::string& name) const { return tensors.count(name) != 0; }
    const Matrix& get(const std::string& name) const;
    Matrix& get(const std::string& name);

    bool operator==(const WeightStore&) const = default;
};

struct Model {
    ModelConfig config;
    WeightStore weights;
};

// Distinct failure classes for the weight-file reader/writer.
enum class ModelIoStatus {
    io_error,         // open/read/write failure
    bad_magic,        // first four bytes are not "LATX"
    version_mismatch, // container version unsupported
    bad_header,       // header JSON malformed or semantically invalid
    missing_tensor,   // a tensor required by the config is absent
    shape_mismatch,   // a tensor is present with the wrong shape
    truncated,        // payload shorter than the header promises
};

const char* to_string(ModelIoStatus s);

class ModelIoError : public std::runtime_error {
  public:
    ModelIoError(ModelIoStatus status, const std::string& msg)
        : std::runtime_error(std::string(to_string(status)) + ": " + msg), status_(status) {}
    ModelIoStatus status() const { return status_; }

  private:
    ModelIoStatus status_;
};

// Binary container layout (version 1), all integers little-endian:
//   bytes 0..3   magic "LATX"
//   bytes 4..7   u32 version = 1
//   bytes 8..15  u64 header length in bytes
//   header       UTF-8 JSON {"config": {...}, "tensors": [{name, shape,
//                dtype:"f32", offset}, ...]}
//   data         raw little-endian f32 payload, starting at the first
//                64-byte boundary after the header; each tensor's `offset`
//                is relative to that data section and is a multiple of 64.
void save_model(const ModelConfig& config, const WeightStore& store, const std::string& path);
Model load_model(const std::string& path);

// Deterministic per seed; every required tensor filled with values in
// [-0.1, 0.1]. Decoder stores omit lm_head.w (tied output embedding).
WeightStore generate_random_model(const ModelConfig& config, uint64_t seed);

size_t parameter_count(const WeightStore& store);

} // namespace latencut

#include "rigmotion/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>
#include <vector>

#include <json.hpp>

namespace rigmotion {

namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'R', 'M', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void write_bytes(std::ofstream& out, const void* data, size_t size) {
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) {
    throw RigError(ErrorCode::IoError, "failed to write checkpoint data");
  }
}

void read_bytes(std::ifstream& in, void* data, size_t size) {
  in.read(static_cast<char*>(data), static_cast<std::streamsize>(size));
  if (in.gcount() != static_cast<std::streamsize>(size)) {
    throw RigError(ErrorCode::IoError, "checkpoint file is truncated");
  }
}

json config_to_json(const DenoiserConfig& c) {
  return json{{"depth", c.depth},
              {"d_model", c.d_model},
              {"heads", c.heads},
              {"j_max", c.j_max},
              {"f_max", c.f_max},
              {"rotation_dim", c.rotation_dim},
              {"cond_dim", c.cond_dim},
              {"cfg_dropout", c.cfg_dropout},
              {"timesteps", c.timesteps},
              {"max_tree_depth", c.max_tree_depth},
              {"max_branch", c.max_branch},
              {"rest_bands", c.rest_bands},
              {"stage", stage_name(c.stage)}};
}

DenoiserConfig config_from_json(const json& j) {
  DenoiserConfig c;
  c.depth = j.at("depth").get<int>();
  c.d_model = j.at("d_model").get<int>();
  c.heads = j.at("heads").get<int>();
  c.j_max = j.at("j_max").get<int>();
  c.f_max = j.at("f_max").get<int>();
  c.rotation_dim = j.at("rotation_dim").get<int>();
  c.cond_dim = j.at("cond_dim").get<int>();
  c.cfg_dropout = j.at("cfg_dropout").get<double>();
  c.timesteps = j.at("timesteps").get<int>();
  c.max_tree_depth = j.at("max_tree_depth").get<int>();
  c.max_branch = j.at("max_branch").get<int>();
  c.rest_bands = j.at("rest_bands").get<int>();
  c.stage = stage_from_name(j.at("stage").get<std::string>());
  return c;
}

}  // namespace

struct CheckpointCodec {
  static void save(DenoiserModel& model, const std::string& path) {
    std::vector<ParamRef> params = model.all_params();
    json header;
    header["config"] = config_to_json(model.config());
    header["trained"] = model.trained();
    header["schedule"] = model.schedule().alphas_cumprod;
    header["norm_mean"] = {model.norm_stats().mean(0), model.norm_stats().mean(1),
                           model.norm_stats().mean(2)};
    header["norm_std"] = {model.norm_stats().stddev(0), model.norm_stats().stddev(1),
                          model.norm_stats().stddev(2)};
    json inventory = json::array();
    for (const ParamRef& p : params) {
      inventory.push_back(
          {{"name", p.name}, {"rows", p.value->rows()}, {"cols", p.value->cols()}});
    }
    header["params"] = inventory;
    header["frozen"] = model.frozen_param_names();
    const std::string header_text = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw RigError(ErrorCode::IoError, "cannot open '" + path + "' for writing");
    }
    write_bytes(out, kMagic, sizeof(kMagic));
    const uint32_t version = kVersion;
    write_bytes(out, &version, sizeof(version));
    const uint64_t header_len = header_text.size();
    write_bytes(out, &header_len, sizeof(header_len));
    write_bytes(out, header_text.data(), header_text.size());
    for (const ParamRef& p : params) {
      // Eigen stores column-major; serialize row-major so the layout is
      // independent of the matrix type's storage order.
      const Mat& m = *p.value;
      std::vector<double> row_major(static_cast<size_t>(m.rows()) * static_cast<size_t>(m.cols()));
      size_t k = 0;
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
          row_major[k++] = m(r, c);
        }
      }
      write_bytes(out, row_major.data(), row_major.size() * sizeof(double));
    }
    out.flush();
    if (!out) {
      throw RigError(ErrorCode::IoError, "failed to finish writing '" + path + "'");
    }
  }

  static DenoiserModel load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw RigError(ErrorCode::MissingCheckpoint, "cannot open checkpoint '" + path + "'");
    }
    char magic[4];
    read_bytes(in, magic, sizeof(magic));
    if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
      throw RigError(ErrorCode::IoError, "'" + path + "' is not a model checkpoint");
    }
    uint32_t version = 0;
    read_bytes(in, &version, sizeof(version));
    if (version != kVersion) {
      throw RigError(ErrorCode::ConfigError,
                     "unsupported checkpoint version " + std::to_string(version));
    }
    uint64_t header_len = 0;
    read_bytes(in, &header_len, sizeof(header_len));
    std::string header_text(header_len, '\0');
    read_bytes(in, header_text.data(), header_len);
    json header;
    try {
      header = json::parse(header_text);
    } catch (const json::exception& e) {
      throw RigError(ErrorCode::IoError, std::string("corrupt checkpoint header: ") + e.what());
    }

    DenoiserModel model(config_from_json(header.at("config")), /*seed=*/0);
    model.schedule_.alphas_cumprod = header.at("schedule").get<std::vector<double>>();
    ValidationResult check = model.schedule_.validate();
    if (!check.ok) {
      throw RigError(check.code, "checkpoint schedule invalid: " + check.message);
    }
    NormStats stats;
    for (int c = 0; c < 3; ++c) {
      stats.mean(c) = header.at("norm_mean").at(static_cast<size_t>(c)).get<double>();
      stats.stddev(c) = header.at("norm_std").at(static_cast<size_t>(c)).get<double>();
    }
    model.set_norm_stats(stats);
    model.set_trained(header.at("trained").get<bool>());

    std::vector<ParamRef> params = model.all_params();
    const json& inventory = header.at("params");
    if (inventory.size() != params.size()) {
      throw RigError(ErrorCode::ConfigError,
                     "checkpoint parameter inventory does not match the model layout");
    }
    for (size_t i = 0; i < params.size(); ++i) {
      const json& entry = inventory.at(i);
      const auto rows = entry.at("rows").get<Eigen::Index>();
      const auto cols = entry.at("cols").get<Eigen::Index>();
      if (entry.at("name").get<std::string>() != params[i].name ||
          rows != params[i].value->rows() || cols != params[i].value->cols()) {
        throw RigError(ErrorCode::ConfigError,
                       "checkpoint parameter '" + entry.at("name").get<std::string>() +
                           "' does not match the model layout");
      }
      std::vector<double> row_major(static_cast<size_t>(rows) * static_cast<size_t>(cols));
      read_bytes(in, row_major.data(), row_major.size() * sizeof(double));
      size_t k = 0;
      for (Eigen::Index r = 0; r < rows; ++r) {
        for (Eigen::Index c = 0; c < cols; ++c) {
          (*params[i].value)(r, c) = row_major[k++];
        }
      }
    }

    // Rebuild the frozen snapshot from the loaded weights so motion-stage
    // training keeps enforcing the freeze after a round trip.
    model.frozen_names_ = header.at("frozen").get<std::vector<std::string>>();
    model.frozen_snapshot_.clear();
    if (!model.frozen_names_.empty()) {
      std::unordered_map<std::string, const Mat*> by_name;
      for (const ParamRef& p : params) {
        by_name[p.name] = p.value;
      }
      for (const std::string& name : model.frozen_names_) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
          throw RigError(ErrorCode::ConfigError,
                         "checkpoint freezes unknown parameter '" + name + "'");
        }
        model.frozen_snapshot_.push_back(*it->second);
      }
    }
    return model;
  }
};

void save_checkpoint(DenoiserModel& model, const std::string& path) {
  CheckpointCodec::save(model, path);
}

DenoiserModel load_checkpoint(const std::string& path) { return CheckpointCodec::load(path); }

}  // namespace rigmotion

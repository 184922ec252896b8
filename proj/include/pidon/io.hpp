#pragma once

#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <locale>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pidon/errors.hpp"
#include "pidon/operator_net.hpp"
#include "pidon/problem_spec.hpp"
#include "pidon/rollout.hpp"
#include "pidon/sampling.hpp"
#include "pidon/training.hpp"

#ifndef PIDON_GIT_DESCRIBE
#define PIDON_GIT_DESCRIBE "unknown"
#endif

namespace pidon {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr int kFormatVersion = 1;

// ---------------------------------------------------------------------------
// Files and binary blocks.

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

/// Little-endian float64 encoding.
inline std::string encode_f64(std::span<const double> v) {
  std::string out(v.size() * 8, '\0');
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(v[i]);
    for (int b = 0; b < 8; ++b) out[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
  return out;
}

inline std::vector<double> decode_f64(std::string_view bytes) {
  if (bytes.size() % 8 != 0) throw FormatError("binary block length is not a multiple of 8");
  std::vector<double> v(bytes.size() / 8);
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    v[i] = std::bit_cast<double>(bits);
  }
  return v;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << v;
  return ss.str();
}

inline std::string dump_json(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------------------
// JSON mappings.

inline std::string variant_name(MlpVariant v) { return v == MlpVariant::kModified ? "modified" : "standard"; }
inline MlpVariant parse_variant(const std::string& s) {
  if (s == "modified") return MlpVariant::kModified;
  if (s == "standard") return MlpVariant::kStandard;
  throw ConfigError("unknown MLP variant '" + s + "'");
}

inline json to_json(const MlpSpec& s) {
  return {{"depth", s.depth}, {"width", s.width}, {"in_dim", s.in_dim}, {"out_dim", s.out_dim},
          {"variant", variant_name(s.variant)}};
}
inline MlpSpec mlp_from_json(const json& j) {
  return {j.at("depth").get<int>(), j.at("width").get<int>(), j.at("in_dim").get<int>(), j.at("out_dim").get<int>(),
          parse_variant(j.at("variant").get<std::string>())};
}

inline json to_json(const OperatorNetSpec& s) {
  json b = json::array();
  for (const auto& m : s.branches) b.push_back(to_json(m));
  return {{"branches", b}, {"trunk", to_json(s.trunk)}, {"partition", s.partition}, {"out_scale", s.out_scale}};
}
inline OperatorNetSpec onet_spec_from_json(const json& j) {
  OperatorNetSpec s;
  for (const auto& b : j.at("branches")) s.branches.push_back(mlp_from_json(b));
  s.trunk = mlp_from_json(j.at("trunk"));
  s.partition = j.at("partition").get<std::vector<int>>();
  s.out_scale = j.at("out_scale").get<std::vector<double>>();
  return s;
}

inline std::string input_kind_name(InputKind k) {
  switch (k) {
    case InputKind::kUniformBox: return "uniform-box";
    case InputKind::kForcingAndIc: return "grf-forcing-and-ic";
    case InputKind::kGrf: return "grf";
    case InputKind::kSoliton: return "soliton";
  }
  return "?";
}
inline InputKind parse_input_kind(const std::string& s) {
  for (auto k : {InputKind::kUniformBox, InputKind::kForcingAndIc, InputKind::kGrf, InputKind::kSoliton})
    if (input_kind_name(k) == s) return k;
  throw ConfigError("unknown input kind '" + s + "'");
}

inline json box_json(const std::vector<Interval>& box) {
  json b = json::array();
  for (const auto& iv : box) b.push_back({iv.lo, iv.hi});
  return b;
}
inline std::vector<Interval> box_from_json(const json& j) {
  std::vector<Interval> box;
  for (const auto& iv : j) {
    if (!iv.is_array() || iv.size() != 2) throw ConfigError("box entries must be [lo, hi]");
    box.push_back({iv[0].get<double>(), iv[1].get<double>()});
  }
  return box;
}

inline json to_json(const ProblemSpec& p) {
  json j = {{"id", problem_name(p.id)},
            {"dt", p.dt},
            {"n_outputs", p.n_outputs},
            {"constants", p.constants},
            {"weights",
             {{"ic", p.weights.ic},
              {"bc", p.weights.bc},
              {"residual", p.weights.residual},
              {"data", p.weights.data},
              {"ic_components", p.weights.ic_components}}},
            {"input",
             {{"kind", input_kind_name(p.input.kind)},
              {"box", box_json(p.input.box)},
              {"length_scale", p.input.length_scale},
              {"taper", p.input.taper},
              {"kernel", "squared-exponential"}}},
            {"m", p.m},
            {"P", p.P},
            {"Q", p.Q}};
  j["space"] = p.space ? json{p.space->lo, p.space->hi} : json(nullptr);
  return j;
}

inline ProblemSpec problem_from_json(const json& j) {
  ProblemSpec p = make_problem(parse_problem(j.at("id").get<std::string>()));
  p.dt = j.at("dt").get<double>();
  p.n_outputs = j.at("n_outputs").get<int>();
  p.constants = j.at("constants").get<std::map<std::string, double>>();
  const auto& w = j.at("weights");
  p.weights = {w.at("ic").get<double>(), w.at("bc").get<double>(), w.at("residual").get<double>(),
               w.at("data").get<double>(), w.at("ic_components").get<std::vector<double>>()};
  const auto& in = j.at("input");
  p.input = {parse_input_kind(in.at("kind").get<std::string>()), box_from_json(in.at("box")),
             in.at("length_scale").get<double>(), in.at("taper").get<bool>()};
  p.m = j.at("m").get<int>();
  p.P = j.at("P").get<int>();
  p.Q = j.at("Q").get<int>();
  if (j.at("space").is_null())
    p.space.reset();
  else
    p.space = Interval{j.at("space")[0].get<double>(), j.at("space")[1].get<double>()};
  validate(p);
  return p;
}

// ---------------------------------------------------------------------------
// Run configuration.

struct SubnetConfig {
  int depth = 4;
  int width = 64;
  MlpVariant variant = MlpVariant::kModified;
};

struct RunConfig {
  ProblemSpec problem = make_problem(ProblemId::kPendulum);
  SubnetConfig branch;
  SubnetConfig trunk;
  int q = 64;
  std::vector<int> partition;     // empty: equal split
  std::vector<double> out_scale;  // empty: problem default
  int N = 2000;
  TrainOptions train;
  std::uint64_t data_seed = 1;
  std::uint64_t init_seed = 1;
  std::string out = "runs/out";

  OperatorNetSpec network() const {
    OperatorNetSpec s;
    s.branches.push_back({branch.depth, branch.width, problem.branch_dim(), q, branch.variant});
    if (problem.two_branch()) s.branches.push_back({branch.depth, branch.width, 1, q, branch.variant});
    s.trunk = {trunk.depth, trunk.width, problem.trunk_dim(), q, trunk.variant};
    s.partition = partition.empty() ? equal_partition(q, problem.n_outputs) : partition;
    if (out_scale.empty()) {
      s.out_scale = default_operator_spec(problem, 1, 1, q).out_scale;
    } else {
      s.out_scale = out_scale;
    }
    validate(s);
    return s;
  }

  void set_seed(std::uint64_t seed) {
    data_seed = seed;
    init_seed = seed;
    train.seed = seed;
  }
};

/// Fully resolved configuration as written into every run directory.
inline json to_json(const RunConfig& c) {
  const auto& t = c.train;
  return {{"problem", to_json(c.problem)},
          {"network",
           {{"branch", {{"depth", c.branch.depth}, {"width", c.branch.width}, {"variant", variant_name(c.branch.variant)}}},
            {"trunk", {{"depth", c.trunk.depth}, {"width", c.trunk.width}, {"variant", variant_name(c.trunk.variant)}}},
            {"q", c.q},
            {"partition", c.network().partition},
            {"out_scale", c.network().out_scale}}},
          {"N", c.N},
          {"train",
           {{"iters", t.iters},
            {"batch_size", t.batch_size},
            {"lr0", t.lr0},
            {"decay_rate", t.decay_rate},
            {"decay_every", t.decay_every},
            {"log_every", t.log_every},
            {"clip_norm", t.clip_norm}}},
          {"seeds", {{"data", c.data_seed}, {"init", c.init_seed}, {"train", t.seed}}},
          {"out", c.out}};
}

namespace detail {

template <class T>
void maybe(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

inline void read_subnet(const json& j, SubnetConfig& s) {
  maybe(j, "depth", s.depth);
  maybe(j, "width", s.width);
  if (j.contains("variant")) s.variant = parse_variant(j.at("variant").get<std::string>());
}

}  // namespace detail

/// Reads a run configuration. Only "problem" is required; it is either a
/// problem id string or a full problem object (as written by to_json), and
/// the optional keys dt, m, P, Q, constants, input_box, weights override the
/// problem defaults.
inline RunConfig run_config_from_json(const json& j) {
  using detail::maybe;
  try {
    RunConfig c;
    const auto& pj = j.at("problem");
    c.problem = pj.is_string() ? make_problem(parse_problem(pj.get<std::string>())) : problem_from_json(pj);
    maybe(j, "dt", c.problem.dt);
    maybe(j, "m", c.problem.m);
    maybe(j, "P", c.problem.P);
    maybe(j, "Q", c.problem.Q);
    if (j.contains("constants"))
      for (const auto& [k, v] : j.at("constants").items()) {
        if (!c.problem.constants.count(k)) throw ConfigError("problem has no constant '" + k + "'");
        c.problem.constants[k] = v.get<double>();
      }
    if (j.contains("input_box")) c.problem.input.box = box_from_json(j.at("input_box"));
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      maybe(w, "ic", c.problem.weights.ic);
      maybe(w, "bc", c.problem.weights.bc);
      maybe(w, "residual", c.problem.weights.residual);
      maybe(w, "data", c.problem.weights.data);
      maybe(w, "ic_components", c.problem.weights.ic_components);
    }
    if (j.contains("network")) {
      const auto& n = j.at("network");
      if (n.contains("branch")) detail::read_subnet(n.at("branch"), c.branch);
      if (n.contains("trunk")) detail::read_subnet(n.at("trunk"), c.trunk);
      maybe(n, "q", c.q);
      maybe(n, "partition", c.partition);
      maybe(n, "out_scale", c.out_scale);
    }
    maybe(j, "N", c.N);
    if (j.contains("train")) {
      const auto& t = j.at("train");
      maybe(t, "iters", c.train.iters);
      maybe(t, "batch_size", c.train.batch_size);
      maybe(t, "lr0", c.train.lr0);
      maybe(t, "decay_rate", c.train.decay_rate);
      maybe(t, "decay_every", c.train.decay_every);
      maybe(t, "log_every", c.train.log_every);
      maybe(t, "clip_norm", c.train.clip_norm);
    }
    if (j.contains("seeds")) {
      const auto& s = j.at("seeds");
      maybe(s, "data", c.data_seed);
      maybe(s, "init", c.init_seed);
      maybe(s, "train", c.train.seed);
    }
    if (j.contains("seed")) c.set_seed(j.at("seed").get<std::uint64_t>());
    maybe(j, "out", c.out);
    validate(c.problem);
    c.network();
    if (c.N < 1) throw ConfigError("N must be positive");
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid run configuration: ") + e.what());
  }
}

inline RunConfig load_run_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Checkpoints: <base>.ckpt.json manifest + <base>.ckpt.bin parameters, with
// the Adam moments appended when an optimizer state is stored.

struct Checkpoint {
  ProblemSpec problem;
  OperatorNet net;
  std::optional<OptimState> opt;
  json seeds = json::object();
  long iteration = 0;
};

inline fs::path checkpoint_base(fs::path p) {
  const std::string s = p.string();
  for (const char* ext : {".ckpt.json", ".ckpt.bin"})
    if (s.size() > std::strlen(ext) && s.compare(s.size() - std::strlen(ext), std::strlen(ext), ext) == 0)
      return fs::path(s.substr(0, s.size() - std::strlen(ext)));
  return p;
}
inline fs::path with_suffix(const fs::path& base, const char* suffix) {
  fs::path p = base;
  p += suffix;
  return p;
}

inline std::pair<std::string, std::string> encode_checkpoint(const Checkpoint& c) {
  const std::size_t n = c.net.params.size();
  std::vector<double> blob = c.net.params;
  json blocks = json::array({{{"name", "params"}, {"count", n}}});
  json j = {{"format_version", kFormatVersion},
            {"problem", to_json(c.problem)},
            {"network", to_json(c.net.spec)},
            {"param_count", n},
            {"seeds", c.seeds},
            {"iteration", c.iteration},
            {"byte_order", "little-endian float64"}};
  if (c.opt) {
    const auto& o = *c.opt;
    blob.insert(blob.end(), o.m.begin(), o.m.end());
    blob.insert(blob.end(), o.v.begin(), o.v.end());
    blocks.push_back({{"name", "adam_m"}, {"count", n}});
    blocks.push_back({{"name", "adam_v"}, {"count", n}});
    j["optimizer"] = {{"step", o.step},     {"beta1", o.beta1},           {"beta2", o.beta2},
                      {"eps", o.eps},       {"lr0", o.lr0},               {"decay_rate", o.decay_rate},
                      {"decay_every", o.decay_every}};
  }
  j["blocks"] = blocks;
  return {dump_json(j), encode_f64(blob)};
}

inline void save_checkpoint(const fs::path& path, const Checkpoint& c) {
  if (c.net.params.size() != operator_layout(c.net.spec).total)
    throw ShapeError("checkpoint parameter count does not match the network");
  const auto base = checkpoint_base(path);
  const auto [manifest, blob] = encode_checkpoint(c);
  write_file_atomic(with_suffix(base, ".ckpt.bin"), blob);
  write_file_atomic(with_suffix(base, ".ckpt.json"), manifest);
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  const auto base = checkpoint_base(path);
  const auto jpath = with_suffix(base, ".ckpt.json");
  const auto bpath = with_suffix(base, ".ckpt.bin");
  if (!fs::exists(jpath)) throw FormatError("checkpoint manifest not found: " + jpath.string());
  if (!fs::exists(bpath)) throw FormatError("checkpoint blob not found: " + bpath.string());
  json j;
  try {
    j = json::parse(read_file(jpath));
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest is not valid JSON: " + std::string(e.what()));
  }
  try {
    const int version = j.at("format_version").get<int>();
    if (version != kFormatVersion) throw FormatError("unsupported checkpoint format version " + std::to_string(version));
    Checkpoint c;
    c.problem = problem_from_json(j.at("problem"));
    c.net.spec = onet_spec_from_json(j.at("network"));
    try {
      validate(c.net.spec);
    } catch (const std::exception& e) {
      throw FormatError(std::string("checkpoint network is inconsistent: ") + e.what());
    }
    if (c.net.spec.n_outputs() != c.problem.n_outputs)
      throw FormatError("checkpoint partition defines " + std::to_string(c.net.spec.n_outputs()) +
                        " outputs but the problem has " + std::to_string(c.problem.n_outputs));
    const auto n = j.at("param_count").get<std::size_t>();
    if (n != operator_layout(c.net.spec).total)
      throw FormatError("checkpoint declares " + std::to_string(n) + " parameters but the network needs " +
                        std::to_string(operator_layout(c.net.spec).total));
    std::size_t declared = 0;
    for (const auto& b : j.at("blocks")) declared += b.at("count").get<std::size_t>();
    const std::string blob = read_file(bpath);
    if (blob.size() != declared * 8)
      throw FormatError("checkpoint blob has " + std::to_string(blob.size()) + " bytes, manifest declares " +
                        std::to_string(declared * 8));
    const auto values = decode_f64(blob);
    c.net.params.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(n));
    if (j.contains("optimizer")) {
      if (declared != 3 * n) throw FormatError("optimizer state needs two moment blocks");
      const auto& o = j.at("optimizer");
      OptimState s;
      s.step = o.at("step").get<long>();
      s.beta1 = o.at("beta1").get<double>();
      s.beta2 = o.at("beta2").get<double>();
      s.eps = o.at("eps").get<double>();
      s.lr0 = o.at("lr0").get<double>();
      s.decay_rate = o.at("decay_rate").get<double>();
      s.decay_every = o.at("decay_every").get<long>();
      s.m.assign(values.begin() + static_cast<std::ptrdiff_t>(n), values.begin() + static_cast<std::ptrdiff_t>(2 * n));
      s.v.assign(values.begin() + static_cast<std::ptrdiff_t>(2 * n), values.end());
      c.opt = std::move(s);
    } else if (declared != n) {
      throw FormatError("checkpoint declares extra blocks without an optimizer state");
    }
    c.seeds = j.at("seeds");
    c.iteration = j.at("iteration").get<long>();
    return c;
  } catch (const json::exception& e) {
    throw FormatError("checkpoint manifest is missing fields: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw FormatError(std::string("checkpoint problem is invalid: ") + e.what());
  }
}

/// FNV-1a over manifest then blob.
inline std::string checkpoint_hash(const fs::path& path) {
  const auto base = checkpoint_base(path);
  return hex64(fnv1a(read_file(with_suffix(base, ".ckpt.bin")), fnv1a(read_file(with_suffix(base, ".ckpt.json")))));
}

// ---------------------------------------------------------------------------
// Field exports: <base>.field.json + <base>.field.bin holding t, then x (PDE),
// then values row-major with rows = times.

struct FieldMeta {
  std::string problem;
  double dt = 0.0;
  int steps = 0;
  int points_per_window = 0;
  std::string checkpoint_hash;
  std::vector<std::string> columns;
};

inline void save_field(const fs::path& base, const FieldMeta& meta, const std::vector<double>& t,
                       const std::vector<double>& x, const Mat& values) {
  if (values.rows() != static_cast<Eigen::Index>(t.size())) throw ShapeError("field rows must match times");
  std::vector<double> blob = t;
  blob.insert(blob.end(), x.begin(), x.end());
  for (Eigen::Index i = 0; i < values.rows(); ++i)
    for (Eigen::Index j = 0; j < values.cols(); ++j) blob.push_back(values(i, j));
  json m = {{"format_version", kFormatVersion},
            {"problem", meta.problem},
            {"dt", meta.dt},
            {"steps", meta.steps},
            {"points_per_window", meta.points_per_window},
            {"checkpoint_hash", meta.checkpoint_hash},
            {"columns", meta.columns},
            {"blocks",
             json::array({{{"name", "t"}, {"count", t.size()}},
                          {{"name", "x"}, {"count", x.size()}},
                          {{"name", "values"}, {"rows", values.rows()}, {"cols", values.cols()}, {"order", "row-major"}}})},
            {"byte_order", "little-endian float64"}};
  write_file_atomic(with_suffix(base, ".field.bin"), encode_f64(blob));
  write_file_atomic(with_suffix(base, ".field.json"), dump_json(m));
}

struct LoadedField {
  json meta;
  std::vector<double> t;
  std::vector<double> x;
  Mat values;
};

inline LoadedField load_field(const fs::path& base) {
  LoadedField f;
  f.meta = json::parse(read_file(with_suffix(base, ".field.json")));
  const auto blob = decode_f64(read_file(with_suffix(base, ".field.bin")));
  const auto& b = f.meta.at("blocks");
  const auto nt = b[0].at("count").get<std::size_t>(), nx = b[1].at("count").get<std::size_t>();
  const auto rows = b[2].at("rows").get<Eigen::Index>(), cols = b[2].at("cols").get<Eigen::Index>();
  if (blob.size() != nt + nx + static_cast<std::size_t>(rows * cols)) throw FormatError("field blob size mismatch");
  f.t.assign(blob.begin(), blob.begin() + static_cast<std::ptrdiff_t>(nt));
  f.x.assign(blob.begin() + static_cast<std::ptrdiff_t>(nt), blob.begin() + static_cast<std::ptrdiff_t>(nt + nx));
  f.values.resize(rows, cols);
  std::size_t k = nt + nx;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) f.values(i, j) = blob[k++];
  return f;
}

// ---------------------------------------------------------------------------
// Training-set export: per-sample arrays concatenated in field order.

inline void save_train_set(const fs::path& base, const TrainSet& ts) {
  std::vector<double> blob = ts.sensors.points;
  json samples = json::array();
  for (const auto& s : ts.samples) {
    json lens = json::object();
    auto put = [&](const char* name, const std::vector<double>& v) {
      lens[name] = v.size();
      blob.insert(blob.end(), v.begin(), v.end());
    };
    put("u", s.u);
    put("u0", {s.u0});
    put("ic_x", s.ic_x);
    put("ic_target", s.ic_target);
    put("bc_t", s.bc_t);
    put("res_x", s.res_x);
    put("res_t", s.res_t);
    put("res_forcing", s.res_forcing);
    put("data_x", s.data_x);
    put("data_t", s.data_t);
    put("data_s", s.data_s);
    put("descriptor", s.descriptor);
    samples.push_back(lens);
  }
  json m = {{"format_version", kFormatVersion},
            {"problem", problem_name(ts.problem)},
            {"seed", ts.seed},
            {"N", ts.size()},
            {"P", ts.P},
            {"Q", ts.Q},
            {"sensors", ts.sensors.size()},
            {"field_order",
             {"u", "u0", "ic_x", "ic_target", "bc_t", "res_x", "res_t", "res_forcing", "data_x", "data_t", "data_s",
              "descriptor"}},
            {"samples", samples},
            {"byte_order", "little-endian float64"}};
  write_file_atomic(with_suffix(base, ".trainset.bin"), encode_f64(blob));
  write_file_atomic(with_suffix(base, ".trainset.json"), dump_json(m));
}

// ---------------------------------------------------------------------------
// Test sets as JSON.

inline json to_json(const TestCase& c) {
  json j = {{"u", std::vector<double>(c.u.data(), c.u.data() + c.u.size())}, {"u0", c.u0}, {"descriptor", c.descriptor}};
  if (c.forcing) j["forcing"] = {{"w", c.forcing->w}, {"b", c.forcing->b}};
  return j;
}

inline TestCase test_case_from_json(const json& j) {
  TestCase c;
  const auto u = j.at("u").get<std::vector<double>>();
  c.u = Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()));
  if (j.contains("u0")) c.u0 = j.at("u0").get<double>();
  if (j.contains("descriptor")) c.descriptor = j.at("descriptor").get<std::vector<double>>();
  if (j.contains("forcing")) {
    FourierForcing f;
    f.w = j.at("forcing").at("w").get<std::vector<double>>();
    f.b = j.at("forcing").at("b").get<std::vector<double>>();
    if (f.w.size() != f.b.size() || f.w.empty()) throw ConfigError("forcing needs matching non-empty w and b");
    c.forcing = std::move(f);
  }
  return c;
}

inline void save_test_set(const fs::path& path, const ProblemSpec& p, const std::vector<TestCase>& cases) {
  json arr = json::array();
  for (const auto& c : cases) arr.push_back(to_json(c));
  write_file_atomic(path, dump_json({{"format_version", kFormatVersion}, {"problem", problem_name(p.id)}, {"cases", arr}}));
}

inline std::vector<TestCase> load_test_set(const fs::path& path) {
  const json j = json::parse(read_file(path));
  std::vector<TestCase> out;
  for (const auto& c : j.at("cases")) out.push_back(test_case_from_json(c));
  return out;
}

// ---------------------------------------------------------------------------
// CSV helpers (classic locale, 17 significant digits).

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) {
    out_.imbue(std::locale::classic());
    out_.precision(17);
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }
  template <class... V>
  void row(const V&... v) {
    int i = 0;
    ((out_ << (i++ ? "," : "") << v), ...);
    out_ << '\n';
  }
  void row(const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? "," : "") << v[i];
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }
  void save(const fs::path& path) const { write_file_atomic(path, str()); }

 private:
  std::ostringstream out_;
};

inline std::string horizon_csv(const std::vector<HorizonRow>& rows) {
  std::vector<std::string> header = {"T", "mean_rel_l2", "diverged"};
  const std::size_t nc = rows.empty() ? 0 : rows.front().component_error.size();
  for (std::size_t k = 0; k < nc; ++k) header.push_back("rel_l2_s" + std::to_string(k + 1));
  CsvWriter w(header);
  for (const auto& r : rows) {
    std::vector<double> v = {r.T, r.mean_error, static_cast<double>(r.diverged)};
    v.insert(v.end(), r.component_error.begin(), r.component_error.end());
    w.row(v);
  }
  return w.str();
}

/// Run manifest written next to every command's outputs.
inline void write_run_manifest(const fs::path& dir, const std::string& command, const json& config, const json& seeds,
                               const json& extra = json::object()) {
  json m = {{"command", command}, {"config", config}, {"seeds", seeds}, {"git_describe", PIDON_GIT_DESCRIBE},
            {"format_version", kFormatVersion}};
  for (const auto& [k, v] : extra.items()) m[k] = v;
  write_file_atomic(dir / "manifest.json", dump_json(m));
}

}  // namespace pidon

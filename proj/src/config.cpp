#include "modslam/config.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <toml.hpp>

#include "modslam/errors.hpp"

namespace modslam {

std::string to_string(SyncMode m) { return m == SyncMode::Lockstep ? "lockstep" : "pipelined"; }

namespace {

std::string node_type_name(const toml::node& n) {
  switch (n.type()) {
    case toml::node_type::table: return "table";
    case toml::node_type::array: return "array";
    case toml::node_type::string: return "string";
    case toml::node_type::integer: return "integer";
    case toml::node_type::floating_point: return "float";
    case toml::node_type::boolean: return "boolean";
    default: return "date/time";
  }
}

[[noreturn]] void mismatch(const std::string& key, const char* want, const toml::node& n) {
  throw ConfigError(fmt::format("{}: expected {}, got {}", key, want, node_type_name(n)));
}

double as_number(const toml::node& n, const std::string& key) {
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_integer()) return static_cast<double>(v->get());
  mismatch(key, "number", n);
}

std::int64_t as_int(const toml::node& n, const std::string& key) {
  if (auto v = n.as_integer()) return v->get();
  mismatch(key, "integer", n);
}

int as_int32(const toml::node& n, const std::string& key) {
  const std::int64_t v = as_int(n, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError(fmt::format("{}: {} is out of range", key, v));
  }
  return static_cast<int>(v);
}

bool as_bool(const toml::node& n, const std::string& key) {
  if (auto v = n.as_boolean()) return v->get();
  mismatch(key, "boolean", n);
}

std::string as_string(const toml::node& n, const std::string& key) {
  if (auto v = n.as_string()) return v->get();
  mismatch(key, "string", n);
}

ConfigValue to_config_value(const toml::node& n, const std::string& key) {
  if (auto v = n.as_boolean()) return v->get();
  if (auto v = n.as_integer()) return v->get();
  if (auto v = n.as_floating_point()) return v->get();
  if (auto v = n.as_string()) return v->get();
  if (auto arr = n.as_array()) {
    std::vector<double> out;
    for (const auto& e : *arr) out.push_back(as_number(e, key + "[]"));
    return out;
  }
  mismatch(key, "scalar or numeric array", n);
}

std::filesystem::path resolve(const std::filesystem::path& p, const std::filesystem::path& base) {
  if (base.empty() || p.empty() || p.is_absolute()) return p;
  return (base / p).lexically_normal();
}

const toml::table& section(const toml::table& root, const std::string& name) {
  static const toml::table empty;
  const toml::node* n = root.get(name);
  if (!n) return empty;
  if (auto t = n->as_table()) return *t;
  mismatch(name, "table", *n);
}

void reject_unknown(const toml::table& t, const std::string& where,
                    const std::vector<std::string>& known) {
  for (const auto& [key, value] : t) {
    const std::string k(key.str());
    if (std::find(known.begin(), known.end(), k) == known.end()) {
      throw ConfigError(fmt::format("unknown key '{}'", where.empty() ? k : where + "." + k));
    }
  }
}

void apply_override(toml::table& root, const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not of the form section.key=value", text));
  }
  std::string path = text.substr(0, eq);
  std::string value = text.substr(eq + 1);
  auto trim = [](std::string& s) {
    s.erase(0, s.find_first_not_of(" \t"));
    s.erase(s.find_last_not_of(" \t") + 1);
  };
  trim(path);
  trim(value);

  toml::table* target = &root;
  std::string key = path;
  if (const auto dot = path.find('.'); dot != std::string::npos) {
    const std::string sec = path.substr(0, dot);
    key = path.substr(dot + 1);
    if (!root.contains(sec)) root.insert(sec, toml::table{});
    target = root.get(sec)->as_table();
    if (!target) throw ConfigError(fmt::format("{}: expected table", sec));
  }
  if (key.empty() || key.find('.') != std::string::npos) {
    throw ConfigError(fmt::format("override key '{}' must be section.key", path));
  }

  try {
    const toml::table parsed = toml::parse("v = " + value);
    parsed.get("v")->visit([&](const auto& node) { target->insert_or_assign(key, node); });
  } catch (const toml::parse_error&) {
    target->insert_or_assign(key, value);  // bare word
  }
}

RunConfig from_table(const toml::table& root, const std::filesystem::path& base_dir) {
  static const std::vector<std::string> kTop = {"dataset", "algorithm", "pipeline", "evaluation",
                                                "output_dir", "seed"};
  reject_unknown(root, "", kTop);
  RunConfig c;

  if (const auto* n = root.get("output_dir")) c.output_dir = as_string(*n, "output_dir");
  if (const auto* n = root.get("seed")) {
    const std::int64_t s = as_int(*n, "seed");
    if (s < 0) throw ConfigError("seed: must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  c.output_dir = resolve(c.output_dir, base_dir);

  const toml::table& ds = section(root, "dataset");
  reject_unknown(ds, "dataset",
                 {"kind", "root", "downsample", "first_frame", "last_frame", "max_dt", "fx", "fy",
                  "cx", "cy", "depth_scale"});
  for (const char* req : {"kind", "root"}) {
    if (!ds.contains(req)) throw ConfigError(fmt::format("missing required key 'dataset.{}'", req));
  }
  c.dataset.kind = parse_dataset_kind(as_string(*ds.get("kind"), "dataset.kind"));
  c.dataset.root = resolve(as_string(*ds.get("root"), "dataset.root"), base_dir);
  if (const auto* n = ds.get("downsample")) c.dataset.downsample = as_int32(*n, "dataset.downsample");
  if (const auto* n = ds.get("first_frame")) c.dataset.first_frame = as_int(*n, "dataset.first_frame");
  if (const auto* n = ds.get("last_frame")) c.dataset.last_frame = as_int(*n, "dataset.last_frame");
  if (const auto* n = ds.get("max_dt")) c.dataset.max_dt = as_number(*n, "dataset.max_dt");
  const std::pair<const char*, std::optional<double>*> intrinsics[] = {
      {"fx", &c.dataset.fx}, {"fy", &c.dataset.fy}, {"cx", &c.dataset.cx},
      {"cy", &c.dataset.cy}, {"depth_scale", &c.dataset.depth_scale}};
  for (const auto& [key, slot] : intrinsics) {
    if (const auto* n = ds.get(key)) *slot = as_number(*n, std::string("dataset.") + key);
  }

  const toml::table& alg = section(root, "algorithm");
  if (!alg.contains("name")) throw ConfigError("missing required key 'algorithm.name'");
  for (const auto& [key, value] : alg) {
    const std::string k(key.str());
    if (k == "name") {
      c.algorithm.name = as_string(value, "algorithm.name");
    } else {
      c.algorithm.params[k] = to_config_value(value, "algorithm." + k);
    }
  }

  const toml::table& pl = section(root, "pipeline");
  reject_unknown(pl, "pipeline",
                 {"queue_capacity", "sync", "viz_interval", "render_eval_interval",
                  "odometry_only", "use_gt_pose"});
  if (const auto* n = pl.get("queue_capacity"))
    c.pipeline.queue_capacity = as_int32(*n, "pipeline.queue_capacity");
  if (const auto* n = pl.get("sync")) {
    const std::string s = as_string(*n, "pipeline.sync");
    if (s == "lockstep") {
      c.pipeline.sync = SyncMode::Lockstep;
    } else if (s == "pipelined") {
      c.pipeline.sync = SyncMode::Pipelined;
    } else {
      throw ConfigError(
          fmt::format("pipeline.sync: unknown mode '{}' (expected lockstep or pipelined)", s));
    }
  }
  if (const auto* n = pl.get("viz_interval"))
    c.pipeline.viz_interval = as_int32(*n, "pipeline.viz_interval");
  if (const auto* n = pl.get("render_eval_interval"))
    c.pipeline.render_eval_interval = as_int32(*n, "pipeline.render_eval_interval");
  if (const auto* n = pl.get("odometry_only"))
    c.pipeline.odometry_only = as_bool(*n, "pipeline.odometry_only");
  if (const auto* n = pl.get("use_gt_pose"))
    c.pipeline.use_gt_pose = as_bool(*n, "pipeline.use_gt_pose");

  const toml::table& ev = section(root, "evaluation");
  reject_unknown(ev, "evaluation",
                 {"align", "max_dt", "tau_f", "tau_c", "samples", "depth_l1_stride"});
  if (const auto* n = ev.get("align"))
    c.evaluation.align = parse_align_mode(as_string(*n, "evaluation.align"));
  if (const auto* n = ev.get("max_dt")) c.evaluation.max_dt = as_number(*n, "evaluation.max_dt");
  if (const auto* n = ev.get("tau_f")) c.evaluation.tau_f = as_number(*n, "evaluation.tau_f");
  if (const auto* n = ev.get("tau_c")) c.evaluation.tau_c = as_number(*n, "evaluation.tau_c");
  if (const auto* n = ev.get("samples")) c.evaluation.samples = as_int32(*n, "evaluation.samples");
  if (const auto* n = ev.get("depth_l1_stride"))
    c.evaluation.depth_l1_stride = as_int32(*n, "evaluation.depth_l1_stride");
  return c;
}

toml::array to_toml_array(const std::vector<double>& v) {
  toml::array a;
  for (double x : v) a.push_back(x);
  return a;
}

}  // namespace

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(dataset.downsample >= 1, "dataset.downsample must be >= 1");
  require(dataset.first_frame >= 0, "dataset.first_frame must be >= 0");
  require(dataset.last_frame == -1 || dataset.last_frame > dataset.first_frame,
          "dataset.last_frame must exceed first_frame (or be -1)");
  require(dataset.max_dt > 0, "dataset.max_dt must be > 0");
  require(pipeline.queue_capacity >= 1, "pipeline.queue_capacity must be >= 1");
  require(pipeline.viz_interval >= 1, "pipeline.viz_interval must be >= 1");
  require(pipeline.render_eval_interval >= 1, "pipeline.render_eval_interval must be >= 1");
  require(evaluation.max_dt > 0, "evaluation.max_dt must be > 0");
  require(evaluation.tau_f > 0 && evaluation.tau_c > 0, "evaluation thresholds must be > 0");
  require(evaluation.samples >= 1, "evaluation.samples must be >= 1");
  require(evaluation.depth_l1_stride >= 1, "evaluation.depth_l1_stride must be >= 1");

  const auto names = registered_algorithms();
  if (std::find(names.begin(), names.end(), algorithm.name) == names.end()) {
    throw ConfigError(fmt::format("unknown algorithm '{}' (registered: {})", algorithm.name,
                                  fmt::join(names, ", ")));
  }
  parse_algorithm_params(algorithm.params);
  if (pipeline.odometry_only && !pipeline.use_gt_pose && algorithm.name == "icp_tsdf") {
    throw ConfigError(
        "icp_tsdf tracks against the map and cannot run odometry_only; use icp_odometry");
  }
}

RunConfig parse_config(std::string_view text, const std::vector<std::string>& overrides,
                       const std::filesystem::path& base_dir) {
  toml::table root;
  try {
    root = toml::parse(text);
  } catch (const toml::parse_error& e) {
    const auto& where = e.source().begin;
    throw ConfigError(fmt::format("config parse error at line {}, column {}: {}", where.line,
                                  where.column, e.description()));
  }
  for (const auto& o : overrides) apply_override(root, o);
  RunConfig c = from_table(root, base_dir);
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError(fmt::format("cannot read config {}", path.string()));
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides, std::filesystem::absolute(path).parent_path());
}

std::string serialize_config(const RunConfig& c) {
  toml::table root;
  root.insert("output_dir", c.output_dir.string());
  root.insert("seed", static_cast<std::int64_t>(c.seed));

  toml::table ds;
  ds.insert("kind", to_string(c.dataset.kind));
  ds.insert("root", c.dataset.root.string());
  ds.insert("downsample", c.dataset.downsample);
  ds.insert("first_frame", static_cast<std::int64_t>(c.dataset.first_frame));
  ds.insert("last_frame", static_cast<std::int64_t>(c.dataset.last_frame));
  ds.insert("max_dt", c.dataset.max_dt);
  const std::pair<const char*, const std::optional<double>*> intrinsics[] = {
      {"fx", &c.dataset.fx}, {"fy", &c.dataset.fy}, {"cx", &c.dataset.cx},
      {"cy", &c.dataset.cy}, {"depth_scale", &c.dataset.depth_scale}};
  for (const auto& [key, slot] : intrinsics) {
    if (*slot) ds.insert(key, **slot);
  }
  root.insert("dataset", std::move(ds));

  toml::table alg;
  alg.insert("name", c.algorithm.name);
  for (const auto& [key, value] : c.algorithm.params) {
    std::visit(
        [&, &k = key](const auto& v) {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, std::vector<double>>) {
            alg.insert(k, to_toml_array(v));
          } else {
            alg.insert(k, v);
          }
        },
        value);
  }
  root.insert("algorithm", std::move(alg));

  toml::table pl;
  pl.insert("queue_capacity", c.pipeline.queue_capacity);
  pl.insert("sync", to_string(c.pipeline.sync));
  pl.insert("viz_interval", c.pipeline.viz_interval);
  pl.insert("render_eval_interval", c.pipeline.render_eval_interval);
  pl.insert("odometry_only", c.pipeline.odometry_only);
  pl.insert("use_gt_pose", c.pipeline.use_gt_pose);
  root.insert("pipeline", std::move(pl));

  toml::table ev;
  ev.insert("align", to_string(c.evaluation.align));
  ev.insert("max_dt", c.evaluation.max_dt);
  ev.insert("tau_f", c.evaluation.tau_f);
  ev.insert("tau_c", c.evaluation.tau_c);
  ev.insert("samples", c.evaluation.samples);
  ev.insert("depth_l1_stride", c.evaluation.depth_l1_stride);
  root.insert("evaluation", std::move(ev));

  std::ostringstream out;
  out << root << "\n";
  return out.str();
}

ComponentGraph instantiate(const RunConfig& config) {
  config.validate();
  ComponentGraph g;
  g.dataset = open_dataset(config.dataset);
  g.algorithm_params = parse_algorithm_params(config.algorithm.params);
  g.algorithm = make_algorithm(config.algorithm.name, g.algorithm_params, g.dataset,
                               {config.pipeline.odometry_only, config.pipeline.use_gt_pose});
  g.pipeline = config.pipeline;
  g.evaluation = config.evaluation;
  return g;
}

}  // namespace modslam

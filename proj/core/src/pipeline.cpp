#include "kgcf/pipeline.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "kgcf/checkpoint.hpp"
#include "kgcf/error.hpp"
#include "kgcf/path_interpret.hpp"

namespace kgcf {

namespace {

long long parse_integer(std::string_view key, std::string_view value) {
  const std::string text(value);
  char* end = nullptr;
  errno = 0;
  const long long v = std::strtoll(text.c_str(), &end, 10);
  if (text.empty() || *end != '\0' || errno != 0) {
    throw ConfigError("'" + std::string(key) + "' expects an integer, got '" + text + "'");
  }
  return v;
}

std::size_t parse_count(std::string_view key, std::string_view value) {
  const auto v = parse_integer(key, value);
  if (v < 0) throw ConfigError("'" + std::string(key) + "' must be >= 0");
  return static_cast<std::size_t>(v);
}

double parse_real(std::string_view key, std::string_view value) {
  const std::string text(value);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || *end != '\0' || errno != 0) {
    throw ConfigError("'" + std::string(key) + "' expects a number, got '" + text + "'");
  }
  return v;
}

using Setter = std::function<void(PipelineConfig&, std::string_view key, std::string_view value)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"data.dir", [](auto& c, auto, auto v) { c.data_dir = std::string(v); }},
      {"data.train", [](auto& c, auto, auto v) { c.train_file = std::string(v); }},
      {"data.valid", [](auto& c, auto, auto v) { c.valid_file = std::string(v); }},
      {"data.test", [](auto& c, auto, auto v) { c.test_file = std::string(v); }},
      {"treatment.k", [](auto& c, auto k, auto v) { c.k = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.dim", [](auto& c, auto k, auto v) { c.embedding_dim = parse_count(k, v); }},
      {"embedding.walks_per_node",
       [](auto& c, auto k, auto v) { c.walks.walks_per_node = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.walk_length",
       [](auto& c, auto k, auto v) { c.walks.walk_length = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.window", [](auto& c, auto k, auto v) { c.walks.window = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.p", [](auto& c, auto k, auto v) { c.walks.return_p = parse_real(k, v); }},
      {"embedding.q", [](auto& c, auto k, auto v) { c.walks.inout_q = parse_real(k, v); }},
      {"embedding.negatives",
       [](auto& c, auto k, auto v) { c.walks.negatives = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.epochs", [](auto& c, auto k, auto v) { c.walks.epochs = static_cast<int>(parse_integer(k, v)); }},
      {"embedding.lr", [](auto& c, auto k, auto v) { c.walks.learning_rate = parse_real(k, v); }},
      {"candidates.scope", [](auto& c, auto, auto v) { c.scope = parse_scope(v); }},
      {"encoder.layers", [](auto& c, auto k, auto v) { c.train.model.layers = parse_count(k, v); }},
      {"encoder.hidden", [](auto& c, auto k, auto v) { c.train.model.dim = parse_count(k, v); }},
      {"decoder.hidden", [](auto& c, auto k, auto v) { c.train.model.decoder_hidden = parse_count(k, v); }},
      {"train.alpha", [](auto& c, auto k, auto v) { c.train.loss.alpha = parse_real(k, v); }},
      {"train.beta", [](auto& c, auto k, auto v) { c.train.loss.beta = parse_real(k, v); }},
      {"train.disc", [](auto& c, auto, auto v) { c.train.loss.disc = parse_discrepancy(v); }},
      {"train.lr", [](auto& c, auto k, auto v) { c.train.learning_rate = parse_real(k, v); }},
      {"train.batch", [](auto& c, auto k, auto v) { c.train.batch_size = parse_count(k, v); }},
      {"train.epochs", [](auto& c, auto k, auto v) { c.train.epochs = parse_count(k, v); }},
      {"train.negatives", [](auto& c, auto k, auto v) { c.train.negatives = parse_count(k, v); }},
      {"seed", [](auto& c, auto k, auto v) { c.seed = static_cast<std::uint64_t>(parse_count(k, v)); }},
      {"out", [](auto& c, auto, auto v) { c.out = std::string(v); }},
  };
  return table;
}

std::ifstream open_input(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + std::string(what) + " '" + path.string() + "'");
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

void ensure_out_dir(const PipelineConfig& config) {
  std::error_code ec;
  std::filesystem::create_directories(config.out, ec);
  if (ec || !std::filesystem::is_directory(config.out)) {
    throw IoError("cannot create output directory '" + config.out.string() + "'");
  }
}

std::filesystem::path artifact(const PipelineConfig& config, const char* name) {
  const auto path = config.out / name;
  if (!std::filesystem::exists(path)) {
    throw IoError("missing artifact '" + path.string() + "' (run prepare first)");
  }
  return path;
}

const std::vector<Triplet>& split_by_name(const Dataset& dataset, const std::string& split) {
  if (split == "train") return dataset.train;
  if (split == "valid") return dataset.valid;
  if (split == "test") return dataset.test;
  throw ConfigError("unknown split '" + split + "' (expected train, valid or test)");
}

void check_checkpoint(const PipelineConfig& config, const ModelParams& params, std::size_t entities,
                      const PreparedState& state) {
  const auto& m = config.train.model;
  if (params.encoder.layers != m.layers || params.encoder.dim != m.dim || params.decoder.hidden != m.decoder_hidden ||
      params.encoder.relations != state.graph.num_augmented_relations() ||
      entities != state.dataset.num_entities()) {
    throw VersionError("checkpoint header (layers=" + std::to_string(params.encoder.layers) +
                       " hidden=" + std::to_string(params.encoder.dim) +
                       " decoder=" + std::to_string(params.decoder.hidden) +
                       " relations=" + std::to_string(params.encoder.relations) +
                       " entities=" + std::to_string(entities) + ") does not match the config and dataset");
  }
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig c;
  if (const char* env = std::getenv("KGCF_DATA"); env != nullptr && *env != '\0') c.data_dir = env;
  return c;
}

PipelineConfig PipelineConfig::parse(std::string_view json_text, const std::string& source) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError(source + ": config must be a JSON object of dotted keys");
  auto config = defaults();
  for (const auto& [key, value] : doc.items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_number() || value.is_boolean()) {
      text = value.dump();
    } else {
      throw ConfigError(source + ": key '" + key + "' must hold a string or a number");
    }
    config.set(key, text);
  }
  return config;
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  auto in = open_input(path, "config");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

void PipelineConfig::set(std::string_view key, std::string_view value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) throw ConfigError("unknown config key '" + std::string(key) + "'");
  it->second(*this, key, value);
}

const std::vector<std::string>& PipelineConfig::keys() {
  static const std::vector<std::string> out = [] {
    std::vector<std::string> k;
    for (const auto& [name, _] : setters()) k.push_back(name);
    return k;
  }();
  return out;
}

std::string PipelineConfig::to_json() const {
  nlohmann::ordered_json doc;
  doc["data.dir"] = data_dir.string();
  doc["data.train"] = train_file;
  doc["data.valid"] = valid_file;
  doc["data.test"] = test_file;
  doc["treatment.k"] = k;
  doc["embedding.dim"] = embedding_dim;
  doc["embedding.walks_per_node"] = walks.walks_per_node;
  doc["embedding.walk_length"] = walks.walk_length;
  doc["embedding.window"] = walks.window;
  doc["embedding.p"] = walks.return_p;
  doc["embedding.q"] = walks.inout_q;
  doc["embedding.negatives"] = walks.negatives;
  doc["embedding.epochs"] = walks.epochs;
  doc["embedding.lr"] = walks.learning_rate;
  doc["candidates.scope"] = std::string(to_string(scope));
  doc["encoder.layers"] = train.model.layers;
  doc["encoder.hidden"] = train.model.dim;
  doc["decoder.hidden"] = train.model.decoder_hidden;
  doc["train.alpha"] = train.loss.alpha;
  doc["train.beta"] = train.loss.beta;
  doc["train.disc"] = std::string(to_string(train.loss.disc));
  doc["train.lr"] = train.learning_rate;
  doc["train.batch"] = train.batch_size;
  doc["train.epochs"] = train.epochs;
  doc["train.negatives"] = train.negatives;
  doc["seed"] = seed;
  doc["out"] = out.string();
  return doc.dump(2);
}

void PipelineConfig::validate() const {
  if (k < 1) throw ConfigError("treatment.k must be >= 1");
  if (embedding_dim < 1) throw ConfigError("embedding.dim must be >= 1");
  walks.validate();
  train.validate();
}

WalkParams PipelineConfig::seeded_walks() const {
  auto w = walks;
  w.seed = derive_seed(seed, "embedding");
  return w;
}

TrainConfig PipelineConfig::seeded_train() const {
  auto t = train;
  t.seed = derive_seed(seed, "train");
  return t;
}

std::string PrepareSummary::to_json() const {
  nlohmann::ordered_json doc;
  doc["matched_fraction"] = matched_fraction;
  nlohmann::ordered_json treated = nlohmann::ordered_json::object();
  for (const auto& [name, frac] : treated_fraction) treated[name] = frac;
  doc["treated_fraction"] = treated;
  return doc.dump(2);
}

Dataset load_config_dataset(const PipelineConfig& config) {
  for (const auto& p : {config.train_path(), config.valid_path(), config.test_path()}) {
    if (!std::filesystem::exists(p)) throw IoError("missing data file '" + p.string() + "'");
  }
  return load_dataset(config.train_path(), config.valid_path(), config.test_path());
}

PreparedState load_prepared(const PipelineConfig& config) {
  config.validate();
  PreparedState state;
  state.dataset = load_config_dataset(config);
  state.graph = build_graph(state.dataset, true);

  const auto assignments_path = artifact(config, kAssignmentsFile);
  auto in = open_input(assignments_path, "assignments");
  state.treatments = TreatmentAssignments::read_tsv(in, state.dataset, assignments_path.string());
  if (state.dataset.num_relations() > 0 && state.treatments.k() != config.k) {
    throw ConfigError("assignments were prepared with k=" + std::to_string(state.treatments.k()) +
                      " but the config asks for k=" + std::to_string(config.k));
  }

  const auto embedding_path = artifact(config, kEmbeddingFile);
  auto emb_in = open_input(embedding_path, "embedding");
  const auto embedding = read_embedding(emb_in, embedding_path.string());
  if (embedding.rows() != state.dataset.num_entities() || embedding.cols() != config.embedding_dim) {
    throw ConfigError("embedding is " + std::to_string(embedding.rows()) + "x" + std::to_string(embedding.cols()) +
                      " but the config expects " + std::to_string(state.dataset.num_entities()) + "x" +
                      std::to_string(config.embedding_dim));
  }

  const auto table_path = artifact(config, kTableFile);
  auto table_in = open_input(table_path, "counterfactual table");
  state.table = TreatmentTable::read_jsonl(table_in, state.dataset.num_relations(), table_path.string());
  const auto originals = state.table.originals();
  if (originals.size() != state.dataset.train.size()) {
    throw ConfigError("counterfactual table has " + std::to_string(originals.size()) + " records for " +
                      std::to_string(state.dataset.train.size()) + " train triplets");
  }
  for (std::size_t i = 0; i < originals.size(); ++i) {
    if (originals[i].triplet != state.dataset.train[i]) {
      throw ConfigError("counterfactual table record " + std::to_string(i + 1) + " does not match the train split");
    }
  }
  return state;
}

PrepareSummary cmd_prepare(const PipelineConfig& config, std::ostream& log) {
  config.validate();
  const auto dataset = load_config_dataset(config);
  log << dataset.report.to_json() << '\n';
  const auto graph = build_graph(dataset, true);
  const auto treatments = TreatmentAssignments::compute(graph, config.k);
  const auto psi = relation_proportions(dataset);
  const auto embedding = build_weighted_embedding(graph, psi, config.embedding_dim, config.seeded_walks());
  const auto candidates = candidate_pairs(dataset, config.scope);
  const auto table = build_table(dataset, embedding, treatments, candidates);

  ensure_out_dir(config);
  {
    auto out = open_output(config.out / kAssignmentsFile);
    treatments.write_tsv(out, dataset);
  }
  {
    auto out = open_output(config.out / kEmbeddingFile);
    write_embedding(out, embedding);
  }
  {
    auto out = open_output(config.out / kTableFile);
    table.write_jsonl(out);
  }

  PrepareSummary summary;
  summary.matched_fraction = table.matched_fraction();
  std::vector<std::size_t> treated(dataset.num_relations(), 0), total(dataset.num_relations(), 0);
  for (const auto& rec : table.originals()) {
    ++total[rec.triplet.relation];
    treated[rec.triplet.relation] += rec.t_factual.value;
  }
  for (RelationId r = 0; r < dataset.num_relations(); ++r) {
    const double frac = total[r] == 0 ? 0.0 : static_cast<double>(treated[r]) / static_cast<double>(total[r]);
    summary.treated_fraction.emplace_back(dataset.relations.name(r), frac);
  }
  return summary;
}

TrainResult cmd_train(const PipelineConfig& config, const PreparedState& state) {
  auto result = train(config.seeded_train(), state.dataset, state.graph, state.treatments, state.table);
  ensure_out_dir(config);
  save_checkpoint(config.out / kCheckpointFile, result.params, state.dataset.num_entities());
  auto log = open_output(config.out / kTrainLogFile);
  write_train_log(log, result.log);
  return result;
}

TrainResult cmd_train(const PipelineConfig& config) { return cmd_train(config, load_prepared(config)); }

MetricsReport cmd_eval(const PipelineConfig& config, const std::string& split,
                       const std::optional<std::filesystem::path>& ranks_path) {
  const auto state = load_prepared(config);
  const auto& triplets = split_by_name(state.dataset, split);
  std::size_t entities = 0;
  const auto params = load_checkpoint(artifact(config, kCheckpointFile), entities);
  check_checkpoint(config, params, entities, state);
  const ScoringModel model{params, state.graph, state.treatments, config.train.loss.encoder,
                           config.train.loss.treatment_input};
  if (triplets.empty()) throw StatisticError("split '" + split + "' is empty");
  const auto ranks = rank_split(model, triplets, all_true_triplets(state.dataset));
  const auto report = metrics_from_ranks(ranks, split);
  {
    auto out = open_output(config.out / kMetricsFile);
    out << report.to_json() << '\n';
  }
  if (ranks_path) {
    auto out = open_output(*ranks_path);
    write_ranks(out, ranks);
  }
  return report;
}

std::string cmd_interpret(const PipelineConfig& config, const std::string& head, const std::string& relation,
                          const std::string& tail, std::size_t k, std::size_t beam) {
  const auto state = load_prepared(config);
  std::size_t entities = 0;
  const auto params = load_checkpoint(artifact(config, kCheckpointFile), entities);
  check_checkpoint(config, params, entities, state);
  const auto& ds = state.dataset;

  std::string rel_name = relation;
  bool inverse = false;
  if (rel_name.size() > 3 && rel_name.ends_with("^-1")) {
    rel_name.resize(rel_name.size() - 3);
    inverse = true;
  }
  RelationId r = ds.relations.at(rel_name);
  if (inverse) r = state.graph.inverse(r);
  const Triplet query{ds.entities.at(head), r, ds.entities.at(tail)};

  const ScoringModel model{params, state.graph, state.treatments, config.train.loss.encoder,
                           config.train.loss.treatment_input};
  const double p = score(model, query);
  const auto importance = edge_importance(model, query);
  const auto paths = top_paths(state.graph, importance, query.head, query.tail, k, params.encoder.layers, beam);
  const auto report = format_report(ds, model, state.table, query, p, paths);
  ensure_out_dir(config);
  auto out = open_output(config.out / kInterpretFile);
  out << report;
  return report;
}

double cmd_ate(const PipelineConfig& config) {
  const auto state = load_prepared(config);
  return estimate_ate(state.table.originals());
}

std::vector<SweepCell> cmd_sweep(const PipelineConfig& config, const std::vector<double>& alphas,
                                 const std::vector<double>& betas) {
  const auto state = load_prepared(config);
  std::vector<SweepCell> cells;
  for (double a : alphas) {
    for (double b : betas) {
      auto tc = config.seeded_train();
      tc.loss.alpha = a;
      tc.loss.beta = b;
      const auto result = train(tc, state.dataset, state.graph, state.treatments, state.table);
      SweepCell cell{a, b, std::nullopt, result.best_epoch};
      for (const auto& e : result.log) {
        if (e.epoch == result.best_epoch) cell.valid_mrr = e.valid_mrr;
      }
      cells.push_back(cell);
    }
  }
  ensure_out_dir(config);
  auto out = open_output(config.out / kSweepFile);
  out << "alpha\tbeta\tvalid_mrr\tbest_epoch\n";
  for (const auto& c : cells) {
    char line[128];
    if (c.valid_mrr) {
      std::snprintf(line, sizeof line, "%g\t%g\t%.6f\t%zu\n", c.alpha, c.beta, *c.valid_mrr, c.best_epoch);
    } else {
      std::snprintf(line, sizeof line, "%g\t%g\tnull\t%zu\n", c.alpha, c.beta, c.best_epoch);
    }
    out << line;
  }
  return cells;
}

}  // namespace kgcf

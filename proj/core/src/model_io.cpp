#include <fstream>
#include <sstream>

#include <json.hpp>

#include "funnel/error.hpp"
#include "funnel/funnel.hpp"

namespace funnel {
namespace {

using nlohmann::json;

std::string kind_name(ScorerKind k) {
  switch (k) {
    case ScorerKind::Linear:
      return "linear";
    case ScorerKind::TrivialRejector:
      return "trivial";
    case ScorerKind::ConstantPositive:
      return "constant";
  }
  return "linear";
}

ScorerKind kind_from(const std::string& s) {
  if (s == "linear") return ScorerKind::Linear;
  if (s == "trivial") return ScorerKind::TrivialRejector;
  if (s == "constant") return ScorerKind::ConstantPositive;
  throw DataError("model file: unknown scorer kind '" + s + "'");
}

json train_config_json(const TrainConfig& c) {
  return {{"reg_strength", c.reg_strength},
          {"tolerance", c.tolerance},
          {"max_iterations", c.max_iterations},
          {"seed", c.seed}};
}

TrainConfig train_config_from(const json& j) {
  TrainConfig c;
  c.reg_strength = j.at("reg_strength").get<double>();
  c.tolerance = j.at("tolerance").get<double>();
  c.max_iterations = j.at("max_iterations").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json config_json(const FunnelConfig& c) {
  return {{"variant", to_string(c.variant)},
          {"mode", to_string(c.mode)},
          {"k", c.k},
          {"calibration_folds", c.calibration_folds},
          {"base", train_config_json(c.base)},
          {"meta", train_config_json(c.meta)},
          {"meta_grid", c.meta_grid},
          {"meta_grid_folds", c.meta_grid_folds},
          {"naive_grid", c.naive_grid},
          {"meta_learner", c.meta_learner == MetaLearner::Rbf ? "rbf" : "linear"},
          {"rff_dim", c.rff_dim},
          {"rff_gamma", c.rff_gamma},
          {"nocalib_monotone", c.nocalib_monotone},
          {"allow_empty_languages", c.allow_empty_languages},
          {"seed", c.seed}};
}

FunnelConfig config_from(const json& j) {
  FunnelConfig c;
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.mode = calibration_mode_from_string(j.at("mode").get<std::string>());
  c.k = j.at("k").get<int>();
  c.calibration_folds = j.at("calibration_folds").get<int>();
  c.base = train_config_from(j.at("base"));
  c.meta = train_config_from(j.at("meta"));
  c.meta_grid = j.at("meta_grid").get<std::vector<double>>();
  c.meta_grid_folds = j.at("meta_grid_folds").get<int>();
  c.naive_grid = j.at("naive_grid").get<std::vector<double>>();
  c.meta_learner = j.at("meta_learner").get<std::string>() == "rbf" ? MetaLearner::Rbf : MetaLearner::Linear;
  c.rff_dim = j.at("rff_dim").get<int>();
  c.rff_gamma = j.at("rff_gamma").get<double>();
  c.nocalib_monotone = j.at("nocalib_monotone").get<bool>();
  c.allow_empty_languages = j.at("allow_empty_languages").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

json classifier_json(const MultilabelClassifier& m) {
  json scorers = json::array();
  for (const auto& s : m.scorers) {
    json js{{"kind", kind_name(s.kind)}, {"bias", s.bias}};
    // Only linear scorers carry weights; the others are rebuilt at load.
    js["weights"] = s.kind == ScorerKind::Linear ? json(s.weights) : json::array();
    scorers.push_back(std::move(js));
  }
  return {{"dimension", m.dimension}, {"scorers", std::move(scorers)}};
}

MultilabelClassifier classifier_from(const json& j) {
  MultilabelClassifier m;
  m.dimension = j.at("dimension").get<std::size_t>();
  for (const auto& js : j.at("scorers")) {
    const ScorerKind kind = kind_from(js.at("kind").get<std::string>());
    BinaryScorer s;
    if (kind == ScorerKind::TrivialRejector) {
      s = BinaryScorer::trivial_rejector(m.dimension);
    } else if (kind == ScorerKind::ConstantPositive) {
      s = BinaryScorer::constant_positive(m.dimension);
    } else {
      s.weights = js.at("weights").get<std::vector<double>>();
      if (s.weights.size() != m.dimension) throw DataError("model file: scorer weight length mismatch");
    }
    s.kind = kind;
    s.bias = js.at("bias").get<double>();
    m.scorers.push_back(std::move(s));
  }
  return m;
}

json calibrators_json(const std::vector<PlattCalibrator>& cals) {
  json out = json::array();
  for (const auto& c : cals) out.push_back({{"alpha", c.alpha}, {"beta", c.beta}, {"trivial", c.trivial}});
  return out;
}

std::vector<PlattCalibrator> calibrators_from(const json& j) {
  std::vector<PlattCalibrator> out;
  for (const auto& c : j) {
    out.push_back({c.at("alpha").get<double>(), c.at("beta").get<double>(), c.at("trivial").get<bool>()});
  }
  return out;
}

json rff_json(const RandomFourierMap& m) {
  return {{"input_dim", m.input_dim()}, {"output_dim", m.output_dim()}, {"gamma", m.gamma()}, {"seed", m.seed()}};
}

RandomFourierMap rff_from(const json& j) {
  return RandomFourierMap(j.at("input_dim").get<std::size_t>(), j.at("output_dim").get<std::size_t>(),
                          j.at("gamma").get<double>(), j.at("seed").get<std::uint64_t>());
}

}  // namespace

void save_model(const FunnelModel& model, const std::filesystem::path& path) {
  json j;
  j["format"] = "funnel-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = model.kind == ModelKind::Funnel ? "funnel" : "naive";
  j["config"] = config_json(model.config);
  j["class_names"] = model.class_names;
  json tier1 = json::object();
  for (const auto& [lang, lm] : model.tier1) {
    tier1[lang] = {{"idf", lm.weighting.idf},
                   {"n_train_docs", lm.weighting.n_train_docs},
                   {"classifier", classifier_json(lm.classifier)},
                   {"calibrators", calibrators_json(lm.calibrators)}};
  }
  j["tier1"] = std::move(tier1);
  if (model.tier2) {
    j["tier2"] = {{"feature_map", model.tier2->feature_map ? rff_json(*model.tier2->feature_map) : json(nullptr)},
                  {"reg_strength", model.tier2->reg_strength},
                  {"classifier", classifier_json(model.tier2->classifier)}};
  }
  if (model.zero_shot) {
    const auto& z = *model.zero_shot;
    j["zero_shot"] = {{"embedding_dim", z.embedding_dim},
                      {"center", z.center},
                      {"scale", z.scale},
                      {"feature_map", rff_json(z.feature_map)},
                      {"classifier", classifier_json(z.classifier)},
                      {"calibrators", calibrators_json(z.calibrators)}};
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write model file " + path.string());
  out << j.dump() << '\n';
  if (!out) throw DataError("failed writing model file " + path.string());
}

FunnelModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open model file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": not a model file (" + e.what() + ")");
  }
  if (j.value("format", "") != "funnel-model") throw DataError(path.string() + ": not a model file");
  const int version = j.value("version", -1);
  if (version != kModelFormatVersion) {
    throw DataError(path.string() + ": model format version " + std::to_string(version) +
                    " is not supported (expected " + std::to_string(kModelFormatVersion) + ")");
  }

  try {
    FunnelModel m;
    m.kind = j.at("kind").get<std::string>() == "naive" ? ModelKind::Naive : ModelKind::Funnel;
    m.config = config_from(j.at("config"));
    m.class_names = j.at("class_names").get<std::vector<std::string>>();
    for (const auto& [lang, jl] : j.at("tier1").items()) {
      LanguageModel lm;
      lm.weighting.language = lang;
      lm.weighting.idf = jl.at("idf").get<std::vector<double>>();
      lm.weighting.n_train_docs = jl.at("n_train_docs").get<std::size_t>();
      lm.classifier = classifier_from(jl.at("classifier"));
      lm.calibrators = calibrators_from(jl.at("calibrators"));
      if (lm.classifier.n_classes() != m.n_classes()) throw DataError("model file: class count mismatch in " + lang);
      m.tier1.emplace(lang, std::move(lm));
    }
    if (j.contains("tier2")) {
      const auto& jt = j.at("tier2");
      MetaClassifier meta;
      if (!jt.at("feature_map").is_null()) meta.feature_map = rff_from(jt.at("feature_map"));
      meta.reg_strength = jt.at("reg_strength").get<double>();
      meta.classifier = classifier_from(jt.at("classifier"));
      m.tier2 = std::move(meta);
    }
    if (j.contains("zero_shot")) {
      const auto& jz = j.at("zero_shot");
      ZeroShotBranch z;
      z.embedding_dim = jz.at("embedding_dim").get<std::size_t>();
      z.center = jz.at("center").get<std::vector<double>>();
      z.scale = jz.at("scale").get<std::vector<double>>();
      z.feature_map = rff_from(jz.at("feature_map"));
      z.classifier = classifier_from(jz.at("classifier"));
      z.calibrators = calibrators_from(jz.at("calibrators"));
      m.zero_shot = std::move(z);
    }
    return m;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": malformed model file (" + e.what() + ")");
  }
}

}  // namespace funnel

#include "upd/eval/diagnostics.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace upd::eval {

std::vector<CurriculumRow> parse_curriculum(const std::string& jsonl) {
  std::vector<CurriculumRow> rows;
  std::istringstream in(jsonl);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      CurriculumRow r;
      r.update = j.at("update").get<int>();
      r.step = j.at("step").get<std::int64_t>();
      const auto hist = j.at("eps_hist").get<std::vector<int>>();
      const auto mask = j.at("mask_mean").get<std::vector<double>>();
      if (hist.size() != r.eps_share.size() || mask.size() != r.mask_mean.size())
        throw DiagnosticsError("bad eps_hist or mask_mean length");
      double total = 0;
      for (int h : hist) total += h;
      for (std::size_t i = 0; i < hist.size(); ++i) r.eps_share[i] = total > 0 ? hist[i] / total : 0.0;
      std::copy(mask.begin(), mask.end(), r.mask_mean.begin());
      rows.push_back(r);
    } catch (const std::exception& e) {
      throw DiagnosticsError("metrics line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<CurriculumRow> read_curriculum(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DiagnosticsError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_curriculum(ss.str());
}

std::string eps_decile_table(const std::vector<CurriculumRow>& rows) {
  std::ostringstream os;
  os << "update\tstep";
  for (int d = 0; d < 10; ++d) os << "\teps_" << d / 10.0 << '_' << (d + 1) / 10.0;
  os << '\n';
  for (const auto& r : rows) {
    os << r.update << '\t' << r.step;
    for (double v : r.eps_share) os << '\t' << v;
    os << '\n';
  }
  return os.str();
}

std::string mask_mean_table(const std::vector<CurriculumRow>& rows) {
  std::ostringstream os;
  os << "update\tstep";
  for (int a = 0; a < env::kNumActions; ++a) os << '\t' << env::action_name(static_cast<env::Action>(a));
  os << '\n';
  for (const auto& r : rows) {
    os << r.update << '\t' << r.step;
    for (double v : r.mask_mean) os << '\t' << v;
    os << '\n';
  }
  return os.str();
}

std::vector<ScatterPoint> learnability_scatter(const trainer::TrainConfig& cfg,
                                               const nn::PolicyParams& params, int n_partners,
                                               std::uint64_t seed) {
  if (n_partners < 1) throw DiagnosticsError("need at least one partner");
  trainer::TrainConfig c = cfg;
  c.seed = seed;
  trainer::Trainer tr(c);
  if (tr.params().values.size() != params.values.size() ||
      tr.params().layout->obs_len() != params.layout->obs_len())
    throw DiagnosticsError("checkpoint does not match the run config");
  tr.mutable_params() = params;

  const partner::PartnerGenConfig pg = trainer::partner_gen_config(c);
  std::vector<learnability::LearnabilityEntry> cands(static_cast<std::size_t>(n_partners));
  Rng rng(stream_seed({seed, 0x5ca7}));
  for (std::size_t i = 0; i < cands.size(); ++i) cands[i].partner = partner::sample_partner_spec(rng, pg, i);
  std::vector<std::vector<double>> sparse;
  const auto scored = tr.score_candidates(std::move(cands), 0, &sparse);
  std::vector<ScatterPoint> out;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    double m = 0;
    for (double r : sparse[i]) m += r;
    out.push_back({scored[i].partner.id, scored[i].partner.epsilon, scored[i].score,
                   m / static_cast<double>(sparse[i].size())});
  }
  return out;
}

std::string scatter_table(const std::vector<ScatterPoint>& pts) {
  std::ostringstream os;
  os << "id\tepsilon\tscore\tmean_return\n";
  for (const auto& p : pts) os << p.id << '\t' << p.epsilon << '\t' << p.score << '\t' << p.mean_return << '\n';
  return os.str();
}

double low_return_share(const std::vector<ScatterPoint>& pts, double fraction) {
  if (pts.empty()) return 0.0;
  double hi = 0.0;
  for (const auto& p : pts) hi = std::max(hi, p.mean_return);
  std::size_t low = 0;
  for (const auto& p : pts) low += (hi <= 0.0 || p.mean_return < fraction * hi) ? 1 : 0;
  return static_cast<double>(low) / static_cast<double>(pts.size());
}

}  // namespace upd::eval

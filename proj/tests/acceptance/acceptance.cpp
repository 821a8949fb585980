// Acceptance checks. Prints one line per criterion:
//   criterion N: PASS|FAIL  <detail>
// Exit status is nonzero when any selected criterion fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "sleepstage/experiment.hpp"
#include "sleepstage/log.hpp"
#include "sleepstage/metrics.hpp"
#include "sleepstage/psg_data.hpp"
#include "sleepstage/report.hpp"
#include "sleepstage/synthgen.hpp"

using namespace sleepstage;
namespace fs = std::filesystem;

namespace {

struct Options {
  std::string cli;
  fs::path work = "acceptance_work";
  int c2_seeds = 5;
  std::vector<Eigen::Index> c2_hidden = {200, 200};
  int jobs = 1;
};

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(prec);
  s << v;
  return s.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::string quote(const std::string& s) { return "'" + s + "'"; }

int run_cli(const Options& o, const std::vector<std::string>& args, const fs::path& log) {
  std::string cmd = quote(o.cli);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " > " + quote(log.string()) + " 2>&1";
  return std::system(cmd.c_str());
}

// Small CSV dataset for the CLI-driven checks.
fs::path small_csv_dataset(const Options& o, const std::string& name, std::uint64_t seed) {
  const fs::path dir = o.work / name;
  if (fs::exists(dir / "night05.csv")) return dir;
  SynthConfig sc;
  sc.recordings = 5;
  sc.epochs_per_recording = 200;
  sc.seed = seed;
  write_dataset(gen_dataset(sc), dir, 6);
  return dir;
}

// Reduced network sizes so the CLI checks finish in a couple of minutes.
std::vector<std::string> small_model_flags() {
  return {"--dbn.hidden", "32", "--dbn.pretrain_epochs", "5", "--dbn.finetune_epochs", "40",
          "--lstm.hidden", "16,8", "--lstm.epochs", "5", "--lstm.batch", "64"};
}

std::vector<std::string> csv_header(const fs::path& report) {
  const auto l = lines_of(slurp(report));
  std::vector<std::string> cols;
  if (l.empty()) return cols;
  std::istringstream in(l[0]);
  for (std::string c; std::getline(in, c, ',');) cols.push_back(c);
  return cols;
}

Outcome criterion1(const Options& o) {
  const fs::path data = small_csv_dataset(o, "c1_data", 101);
  const fs::path out = o.work / "c1_out";
  fs::remove_all(out);
  std::vector<std::string> args = {"loocv", "--data", data.string(), "--out", out.string(),
                                   "--models", "dbn,lstm,dbn+hmm,dbn+lstm", "--seq", "5", "--log-level", "warn"};
  const auto extra = small_model_flags();
  args.insert(args.end(), extra.begin(), extra.end());
  if (run_cli(o, args, o.work / "c1.log") != 0) return {false, "loocv exited nonzero, see " + (o.work / "c1.log").string()};

  const auto cols = csv_header(out / "report.csv");
  const std::vector<std::string> want = {"fold",          "DBN_acc",          "DBN_f1",
                                         "LSTM_5seq_acc", "LSTM_5seq_f1",     "DBN+HMM_acc",
                                         "DBN+HMM_f1",    "DBN+LSTM_5seq_acc", "DBN+LSTM_5seq_f1"};
  if (cols != want) return {false, "unexpected report header"};
  const auto rows = lines_of(slurp(out / "report.csv"));
  std::vector<std::string> keys;
  for (const auto& r : rows) keys.push_back(r.substr(0, r.find(',')));
  const std::vector<std::string> want_rows = {"fold", "fold1", "fold2", "fold3", "fold4", "fold5", "avg", "std"};
  if (keys != want_rows) return {false, "unexpected report rows"};
  for (const char* f : {"confusion_dbn.csv", "confusion_lstm_5seq.csv", "confusion_dbn_hmm.csv",
                        "confusion_dbn_lstm_5seq.csv"}) {
    const auto c = lines_of(slurp(out / f));
    if (c.size() != 6 || c[0] != "actual,WAKE,S1,S2,SWS,REM") return {false, std::string("bad ") + f};
  }
  if (!fs::exists(out / "hypnogram_fold1.svg")) return {false, "hypnogram missing"};
  return {true, "report.csv 5 folds + avg/std x 4 models, 4 confusion tables, hypnograms (CSV input, 5x200 epochs)"};
}

Outcome criterion2(const Options& o) {
  int ordered = 0, beats_hmm = 0, hmm_beats_lstm = 0, beats_dbn = 0;
  double lstm_sum = 0.0;
  std::ostringstream detail;
  for (int s = 0; s < o.c2_seeds; ++s) {
    SynthConfig sc;
    sc.seed = static_cast<std::uint64_t>(s);
    std::vector<RecordingFeatures> feats;
    for (const auto& r : gen_dataset(sc)) feats.push_back(features_for(r));
    ExperimentConfig cfg;
    cfg.seed = static_cast<std::uint64_t>(1000 + s);
    cfg.dbn.hidden = o.c2_hidden;
    cfg.jobs = o.jobs;
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult r = run_experiment(feats, cfg);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::map<ModelKind, double> acc;
    for (const auto& row : r.summary) acc[row.model] = row.mean_accuracy;
    const double dl = acc[ModelKind::DbnLstm], dh = acc[ModelKind::DbnHmm], l = acc[ModelKind::Lstm],
                 d = acc[ModelKind::Dbn];
    const bool ok = dl >= dh && dh >= l && dl > d;
    ordered += ok;
    beats_hmm += dl >= dh;
    hmm_beats_lstm += dh >= l;
    beats_dbn += dl > d;
    lstm_sum += dl;
    detail << " seed" << s << "[DBN+LSTM " << fmt(dl) << " DBN+HMM " << fmt(dh) << " LSTM " << fmt(l) << " DBN "
           << fmt(d) << (ok ? " ordered" : " out-of-order") << ", " << fmt(secs, 0) << "s]";
    std::cerr << "criterion 2 progress:" << detail.str() << "\n";
  }
  const double mean_dl = lstm_sum / o.c2_seeds;
  const bool pass = ordered >= (o.c2_seeds * 4 + 4) / 5 && mean_dl >= 0.90;
  const std::string n = "/" + std::to_string(o.c2_seeds);
  return {pass, "ordering holds for " + std::to_string(ordered) + n + " seeds (DBN+LSTM>=DBN+HMM " +
                    std::to_string(beats_hmm) + n + ", DBN+HMM>=LSTM " + std::to_string(hmm_beats_lstm) + n +
                    ", DBN+LSTM>DBN " + std::to_string(beats_dbn) + n + "), DBN+LSTM mean " + fmt(mean_dl) +
                    " (need 0.90);" + detail.str()};
}

Outcome criterion3(const Options&) {
  double dbn_err = 0.0, lstm_err = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    DbnModel m = DbnModel::init(4, {3, 3}, 5, seed);
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 0.5);
    for (auto& l : m.layers) {
      for (Eigen::Index i = 0; i < l.weights.size(); ++i) l.weights.data()[i] = g(rng);
      for (Eigen::Index i = 0; i < l.hidden_bias.size(); ++i) l.hidden_bias(i) = g(rng);
    }
    for (Eigen::Index i = 0; i < m.head_weights.size(); ++i) m.head_weights.data()[i] = g(rng);
    Eigen::MatrixXd x(4, 6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    dbn_err = std::max(dbn_err, oracle::dbn_gradient_error(m, x, {0, 1, 2, 3, 4, 1}));

    StackedLstm net = StackedLstm::init(4, {3, 2, 2}, 3, 4, seed + 10);
    for (auto& b : net.weights.blocks())
      for (double& v : b) v += g(rng);
    std::vector<SequenceWindow> batch(5);
    for (std::size_t k = 0; k < batch.size(); ++k) {
      batch[k].inputs.resize(4, 4);
      for (Eigen::Index i = 0; i < batch[k].inputs.size(); ++i) batch[k].inputs.data()[i] = g(rng) * 2.0;
      batch[k].label = static_cast<int>(k % 3);
    }
    lstm_err = std::max(lstm_err, oracle::lstm_gradient_error(net, batch));
  }
  const bool pass = dbn_err < 1e-4 && lstm_err < 1e-4;
  return {pass, "max rel error DBN " + fmt(dbn_err, 10) + ", LSTM " + fmt(lstm_err, 10) + " (bound 1e-4, step 1e-5)"};
}

Outcome criterion4(const Options&) {
  int improved = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto [before, after] = oracle::cd_toy_run(seed, 200);
    improved += after < before;
  }
  return {improved >= 95, std::to_string(improved) + "/100 seeds reduced reconstruction cross-entropy (need 95)"};
}

Outcome criterion5(const Options&) {
  int cases = 0, matched = 0;
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const HmmModel m = oracle::random_hmm(5, rng);
    for (int T = 1; T <= 6; ++T) {
      // posteriors through the public decoder, scores for the oracle
      Eigen::MatrixXd post(T, 5);
      for (int t = 0; t < T; ++t) post.row(t) = oracle::random_simplex(5, rng).transpose();
      Eigen::MatrixXd log_e(T, 5);
      for (int t = 0; t < T; ++t)
        for (int s = 0; s < 5; ++s) log_e(t, s) = std::log(post(t, s) / m.class_priors(s));
      const auto decoded = viterbi(m, post, EmissionMode::ScaledLikelihood).path;
      ++cases;
      matched += decoded == oracle::brute_force_path(m, log_e);
    }
  }
  return {matched == cases, std::to_string(matched) + "/" + std::to_string(cases) +
                                " decodes equal exhaustive enumeration (25 models, T=1..6, 5 states)"};
}

Outcome criterion6(const Options&) {
  std::vector<std::string> bad;
  using S = SleepStage;
  const std::vector<S> a = {S::Wake, S::Wake, S::S1, S::S1}, b = {S::Wake, S::S1, S::Wake};
  if (kept_after_transition_removal(a, 1) != std::vector<std::size_t>{0, 3}) bad.push_back("[W,W,S1,S1]");
  if (!kept_after_transition_removal(b, 1).empty()) bad.push_back("[W,S1,W]");

  Rng rng(6);
  std::uniform_int_distribution<int> extra(0, 40);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<S> labels;
    std::array<int, 5> all{}, va{};
    for (int c = 0; c < 5; ++c) {
      const int n = 6 + extra(rng);
      all[static_cast<std::size_t>(c)] = n;
      for (int i = 0; i < n; ++i) labels.push_back(stage_from_index(c));
    }
    const auto mask = balanced_validation_mask(labels, static_cast<std::uint64_t>(trial));
    for (std::size_t i = 0; i < labels.size(); ++i) va[static_cast<std::size_t>(stage_index(labels[i]))] += mask[i];
    for (std::size_t c = 0; c < 5; ++c) {
      const int tr = all[c] - va[c];
      // train:validation of 5:1, within one epoch
      if (std::abs(tr - 5 * va[c]) > 6 || std::abs(6 * va[c] - all[c]) > 6) {
        bad.push_back("split trial " + std::to_string(trial));
        break;
      }
    }
  }
  if (loocv_folds(5).size() != 5 || loocv_folds(10).size() != 10) bad.push_back("fold counts");
  if (bad.empty()) return {true, "transition cases, 50 randomized 5:1 splits, 5 and 10 folds"};
  std::string d = "failed:";
  for (const auto& x : bad) d += " " + x;
  return {false, d};
}

Outcome criterion7(const Options&) {
  std::vector<std::string> bad;
  const std::vector<int> truth = {0, 0, 0, 1, 1, 2, 2, 3, 4, 4};
  const std::vector<int> pred = {0, 0, 1, 1, 2, 2, 2, 3, 4, 0};
  const ConfusionMatrix cm = confusion(pred, truth);
  if (cm.trace() != 7 || cm.total() != 10 || cm.accuracy() != 0.7) bad.push_back("hand case");
  if (cm.counts[0][1] != 1 || cm.counts[1][2] != 1 || cm.counts[4][0] != 1) bad.push_back("hand cells");

  Rng rng(7);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> t(200), p(200);
    for (auto& v : t) v = cls(rng);
    for (auto& v : p) v = cls(rng);
    const ConfusionMatrix c = confusion(p, t);
    if (c.accuracy() != static_cast<double>(c.trace()) / static_cast<double>(c.total())) bad.push_back("accuracy");
    for (const auto& row : c.row_percent()) {
      double s = 0.0;
      for (double v : row) s += v;
      if (std::abs(s - 100.0) > 1e-9) bad.push_back("row percent");
    }
  }

  double worst = 0.0;
  const DbnModel dbn = DbnModel::init(28, {200, 200}, 5, 7);
  Eigen::MatrixXd x(28, 500);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const Eigen::MatrixXd post = transform(dbn, x);
  for (Eigen::Index j = 0; j < post.cols(); ++j) worst = std::max(worst, std::abs(post.col(j).sum() - 1.0));
  Eigen::MatrixXd logits = Eigen::MatrixXd::Random(5, 500) * 800.0;
  const Eigen::MatrixXd sm = softmax(logits);
  for (Eigen::Index j = 0; j < sm.cols(); ++j) worst = std::max(worst, std::abs(sm.col(j).sum() - 1.0));
  if (worst > 1e-12) bad.push_back("softmax sum");

  if (bad.empty())
    return {true, "10-item case exact, 100 random matrices row sums within 1e-9, softmax max |sum-1| = " +
                      fmt(worst, 17)};
  std::set<std::string> uniq(bad.begin(), bad.end());
  std::string d = "failed:";
  for (const auto& s : uniq) d += " " + s;
  return {false, d};
}

Outcome criterion8(const Options& o) {
  const fs::path data = small_csv_dataset(o, "c8_data", 808);
  std::string first;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = o.work / ("c8_out" + std::to_string(run));
    fs::remove_all(out);
    std::vector<std::string> args = {"loocv", "--data", data.string(), "--out", out.string(), "--models",
                                     "dbn,dbn+hmm,lstm,dbn+lstm", "--seed", "8", "--log-level", "warn"};
    const auto extra = small_model_flags();
    args.insert(args.end(), extra.begin(), extra.end());
    const fs::path log = o.work / ("c8_run" + std::to_string(run) + ".log");
    if (run_cli(o, args, log) != 0) return {false, "loocv exited nonzero, see " + log.string()};
    const std::string report = slurp(out / "report.csv");
    if (report.empty()) return {false, "empty report.csv"};
    if (run == 0)
      first = report;
    else if (report != first)
      return {false, "report.csv differs between runs"};
  }
  return {true, "two loocv runs, report.csv byte-identical (" + std::to_string(first.size()) + " bytes)"};
}

Outcome criterion9(const Options& o) {
  const fs::path data = small_csv_dataset(o, "c1_data", 101);
  const fs::path out = o.work / "c9_out";
  fs::remove_all(out);
  std::vector<std::string> args = {"loocv", "--data", data.string(), "--out", out.string(), "--models",
                                   "lstm,dbn+lstm", "--seq", "5,10,15", "--log-level", "warn"};
  auto extra = small_model_flags();
  args.insert(args.end(), extra.begin(), extra.end());
  for (const auto& a : {"--lstm.epochs", "2"}) args.push_back(a);
  if (run_cli(o, args, o.work / "c9.log") != 0) return {false, "loocv exited nonzero"};
  const auto cols = csv_header(out / "report.csv");
  std::vector<std::string> want = {"fold"};
  for (const char* m : {"LSTM", "DBN+LSTM"})
    for (int s : {5, 10, 15}) {
      want.push_back(std::string(m) + "_" + std::to_string(s) + "seq_acc");
      want.push_back(std::string(m) + "_" + std::to_string(s) + "seq_f1");
    }
  if (cols != want) return {false, "unexpected header"};
  const auto rows = lines_of(slurp(out / "report.csv"));
  if (rows.size() != 8) return {false, "expected 5 fold rows plus avg and std"};
  return {true, "accuracy and F1 columns for LSTM and DBN+LSTM at 5, 10 and 15 epochs"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Options o;
  std::vector<int> only;
  std::vector<long> hidden;
  app.add_option("--only", only, "Criteria to run (default: all)")->check(CLI::Range(1, 9));
  app.add_option("--cli", o.cli, "Path to the sleepstage executable");
  app.add_option("--work", o.work, "Scratch directory");
  app.add_option("--c2-seeds", o.c2_seeds, "Seeds for the ordering check")->check(CLI::Range(1, 100));
  app.add_option("--c2-hidden", hidden, "DBN hidden sizes for the ordering check");
  app.add_option("--jobs", o.jobs, "Folds trained concurrently in the ordering check");
  CLI11_PARSE(app, argc, argv);
  if (!hidden.empty()) o.c2_hidden.assign(hidden.begin(), hidden.end());
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  fs::create_directories(o.work);
  set_log_level(LogLevel::Warn);

  const std::vector<std::function<Outcome(const Options&)>> checks = {
      criterion1, criterion2, criterion3, criterion4, criterion5, criterion6, criterion7, criterion8, criterion9};
  bool all = true;
  for (int n : only) {
    const bool needs_cli = n == 1 || n == 8 || n == 9;
    Outcome r;
    const auto t0 = std::chrono::steady_clock::now();
    if (needs_cli && o.cli.empty()) {
      r = {false, "--cli not given"};
    } else {
      try {
        r = checks[static_cast<std::size_t>(n - 1)](o);
      } catch (const std::exception& e) {
        r = {false, std::string("exception: ") + e.what()};
      }
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << ": " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << " [" << fmt(secs, 1)
              << "s]" << std::endl;
    all &= r.pass;
  }
  return all ? 0 : 1;
}

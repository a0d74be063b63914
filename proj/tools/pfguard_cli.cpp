// Copyright 2026 The PFGuard Lab Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// pfguard command-line driver.
//
//   pfguard data gen --config C [--seed N] [--out DIR]
//   pfguard train    --config C [--seed N] [--out DIR]
//   pfguard eval     --config C [--seed N] [--out DIR]
//   pfguard run      --config C [--seed N] [--out DIR]
//   pfguard sweep    --config C --axis A --values v1,v2,... [--seed N] [--out DIR]
//   pfguard account  --config C [--seed N] [--out DIR]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pfguard/pfguard.hpp"

namespace fs = std::filesystem;
using namespace pfguard;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void AddCommon(CLI::App* cmd, CommonArgs& a) {
  cmd->add_option("--config", a.config, "experiment config file")->required();
  cmd->add_option("--seed", a.seed, "run this seed only");
  cmd->add_option("--out", a.out, "output directory");
}

ExperimentConfig Load(const CommonArgs& a) {
  ExperimentConfig c = LoadConfig(a.config);
  if (a.seed) c.seeds = {*a.seed};
  if (!a.out.empty()) c.output_dir = a.out;
  return c;
}

void WriteFile(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw Error("cannot write " + p.string());
}

int DataGen(const CommonArgs& a) {
  const ExperimentConfig c = Load(a);
  for (std::uint64_t seed : c.seeds) {
    const fs::path dir = SeedDir(c.output_dir, seed);
    fs::create_directories(dir);
    const ExperimentData d = MakeExperimentData(c, seed);
    std::ofstream tr(dir / "train.csv"), te(dir / "test.csv");
    WriteDatasetCsv(tr, d.train);
    WriteDatasetCsv(te, d.test);
    if (d.reference) {
      std::ofstream rf(dir / "reference.csv");
      WriteDatasetCsv(rf, *d.reference);
    }
    std::cout << dir.string() << ": " << d.train.size() << " train, " << d.test.size()
              << " test" << (d.reference ? ", " + std::to_string(d.reference->size()) + " reference" : "")
              << "\n";
  }
  return 0;
}

int TrainCmd(const CommonArgs& a) {
  const ExperimentConfig c = Load(a);
  const std::string hash = ConfigHash(c);
  const double sigma = ResolveSigma(c);
  for (std::uint64_t seed : c.seeds) {
    const fs::path dir = SeedDir(c.output_dir, seed);
    fs::create_directories(dir);
    TrainConfig tc = c.train;
    tc.noise_multiplier = sigma;
    tc.delta = c.privacy.delta;
    tc.seed = seed;
    const ExperimentData d = MakeExperimentData(c, seed);
    const TrainResult r = Train(d.train, tc, d.reference ? &*d.reference : nullptr);
    for (const std::string& w : r.warnings) std::cerr << "warning: " << w << "\n";
    {
      std::ofstream ck(dir / "generator.ckpt", std::ios::binary);
      WriteCheckpoint(ck, r.generator, hash, tc.steps);
    }
    std::string hist = "step,phase,loss,epsilon\n";
    for (const HistoryRow& h : r.history) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%zu,%s,%.17g,%.17g\n", h.step, h.phase.c_str(),
                    h.loss, h.epsilon);
      hist += buf;
    }
    WriteFile(dir / "history.csv", hist);
    WriteFile(dir / "accountant.json",
              AccountantReport(r.ledger, c.privacy.delta).dump(2) + "\n");
    std::cout << dir.string() << ": epsilon " << LedgerEpsilon(r.ledger, c.privacy.delta)
              << " (noise multiplier " << sigma << ")\n";
  }
  return 0;
}

int EvalCmd(const CommonArgs& a) {
  const ExperimentConfig c = Load(a);
  const std::string hash = ConfigHash(c);
  std::string csv = MetricsHeader() + "\n";
  for (std::uint64_t seed : c.seeds) {
    const fs::path dir = SeedDir(c.output_dir, seed);
    std::ifstream ck(dir / "generator.ckpt", std::ios::binary);
    if (!ck) throw Error("no checkpoint in " + dir.string() + "; run `train` first");
    CheckpointHeader header;
    const Mlp gen = ReadCheckpoint(ck, &header);
    if (header.config_hash != hash)
      throw Error("checkpoint was trained with config " + header.config_hash +
                  ", not " + hash);
    std::ifstream acc(dir / "accountant.json");
    if (!acc) throw Error("no accountant.json in " + dir.string());
    const nlohmann::json ledger = nlohmann::json::parse(acc);
    SeedResult r;
    r.seed = seed;
    r.noise_multiplier = ResolveSigma(c);
    r.epsilon = ledger.at("epsilon").is_number() ? ledger.at("epsilon").get<double>()
                                                 : INFINITY;
    const ExperimentData d = MakeExperimentData(c, seed);
    Rng er = DeriveStream(seed, StreamTag::kEval);
    const std::vector<Vec> synth = Generate(gen, kSyntheticSamples, er);
    EvalConfig ec = c.eval;
    ec.classifier.seed = SubSeed(seed, StreamTag::kEval);
    r.report = EvaluateSynthetic(synth, d.train, d.test, ec);
    WriteFile(dir / "eval.json", r.report.ToJson().dump(2) + "\n");
    csv += MetricsRow(c, hash, r) + "\n";
  }
  fs::create_directories(c.output_dir);
  WriteFile(fs::path(c.output_dir) / "metrics.csv", csv);
  std::cout << csv;
  return 0;
}

int RunCmd(const CommonArgs& a) {
  const ExperimentConfig c = Load(a);
  const RunRecord rec = RunExperiment(c);
  for (const SeedResult& s : rec.seeds) {
    for (const std::string& w : s.warnings) std::cerr << "warning: seed " << s.seed << ": " << w << "\n";
    std::printf("seed %llu: epsilon %.4g, kl %.4f, minority mmd %.4f, accuracy %.3f\n",
                static_cast<unsigned long long>(s.seed), s.epsilon, s.report.kl_to_uniform,
                s.report.per_group_mmd.front(), s.report.downstream.accuracy);
  }
  std::printf("wrote %s/metrics.csv (config %s)\n", c.output_dir.c_str(),
              rec.config_hash.c_str());
  return 0;
}

int SweepCmd(const CommonArgs& a, const std::string& axis_name,
             const std::vector<std::string>& raw_values) {
  const ExperimentConfig c = Load(a);
  const SweepAxis axis = ParseSweepAxis(axis_name);
  std::vector<double> values;
  for (const std::string& v : raw_values) values.push_back(internal::ParseDouble("--values", v));
  if (values.empty()) throw ConfigError("--values", "need at least one value");
  for (double v : values) WithAxisValue(c, axis, v);  // validate before running
  const SweepResult res = Sweep(c, axis, values);
  for (const SweepFailure& f : res.failures)
    std::cerr << "failed: " << axis_name << "=" << f.value << " seed " << f.seed << ": "
              << f.message << "\n";
  std::cout << res.csv;
  return 0;
}

int AccountCmd(const CommonArgs& a) {
  const ExperimentConfig c = Load(a);
  const double sigma = ResolveSigma(c);
  TrainConfig tc = c.train;
  tc.noise_multiplier = sigma;
  const PrivacyLedger planned = PlannedLedger(tc, c.data.geometry.dim);
  nlohmann::json j = AccountantReport(planned, c.privacy.delta);
  j["noise_multiplier"] = sigma;
  j["steps"] = c.train.steps;
  j["config_hash"] = ConfigHash(c);
  if (std::isinf(LedgerEpsilon(planned, c.privacy.delta))) j["epsilon"] = "inf";
  const std::string text = j.dump(2) + "\n";
  if (!a.out.empty()) {
    fs::create_directories(c.output_dir);
    WriteFile(fs::path(c.output_dir) / "accountant_plan.json", text);
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Private and fair generative training on synthetic mixtures"};
  app.require_subcommand(1);

  CommonArgs data_args, train_args, eval_args, run_args, sweep_args, account_args;
  CLI::App* data = app.add_subcommand("data", "dataset utilities");
  data->require_subcommand(1);
  CLI::App* gen = data->add_subcommand("gen", "write train/test(/reference) CSVs");
  AddCommon(gen, data_args);
  CLI::App* train = app.add_subcommand("train", "train and write checkpoints");
  AddCommon(train, train_args);
  CLI::App* eval = app.add_subcommand("eval", "evaluate trained checkpoints");
  AddCommon(eval, eval_args);
  CLI::App* run = app.add_subcommand("run", "data, training and evaluation for every seed");
  AddCommon(run, run_args);
  CLI::App* sweep = app.add_subcommand("sweep", "run one experiment per axis value");
  AddCommon(sweep, sweep_args);
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "epsilon, gamma, n_T or ref_size")->required();
  sweep->add_option("--values", values, "comma-separated values")
      ->required()
      ->delimiter(',');
  CLI::App* account = app.add_subcommand("account", "print the planned privacy cost");
  AddCommon(account, account_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return DataGen(data_args);
    if (train->parsed()) return TrainCmd(train_args);
    if (eval->parsed()) return EvalCmd(eval_args);
    if (run->parsed()) return RunCmd(run_args);
    if (sweep->parsed()) return SweepCmd(sweep_args, axis, values);
    if (account->parsed()) return AccountCmd(account_args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 2;
}

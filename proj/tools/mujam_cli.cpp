// Copyright 2026 The MuJAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end over the C API.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mujam/mujam.h"

namespace fs = std::filesystem;

namespace {

// Thrown by check() to unwind with the status as the exit code.
struct Failure {
  int code;
};

void check(mujam_status s) {
  if (s == MUJAM_OK) return;
  std::fprintf(stderr, "mujam: %s: %s\n", mujam_status_name(s), mujam_last_error());
  throw Failure{static_cast<int>(s)};
}

struct ConfigDeleter {
  void operator()(mujam_config* c) const { mujam_config_destroy(c); }
};
struct NetworkDeleter {
  void operator()(mujam_network* n) const { mujam_network_destroy(n); }
};
using ConfigPtr = std::unique_ptr<mujam_config, ConfigDeleter>;
using NetworkPtr = std::unique_ptr<mujam_network, NetworkDeleter>;

ConfigPtr make_config(const std::string& path, const std::vector<std::string>& overrides) {
  mujam_config* c = nullptr;
  check(path.empty() ? mujam_config_create(&c) : mujam_config_load(path.c_str(), &c));
  ConfigPtr cfg(c);
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "mujam: configuration error: --set expects key=value, got '%s'\n", o.c_str());
      throw Failure{MUJAM_ERR_CONFIG};
    }
    check(mujam_config_set(cfg.get(), o.substr(0, eq).c_str(), o.substr(eq + 1).c_str()));
  }
  return cfg;
}

std::string config_value(const mujam_config* cfg, const char* key) {
  size_t needed = 0;
  check(mujam_config_get(cfg, key, nullptr, 0, &needed));
  std::string s(needed, '\0');
  check(mujam_config_get(cfg, key, s.data(), s.size(), &needed));
  s.resize(needed - 1);
  return s;
}

std::vector<std::string> split(const std::string& csv) {
  std::vector<std::string> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    std::fprintf(stderr, "mujam: i/o error: cannot create %s\n", dir.c_str());
    throw Failure{MUJAM_ERR_IO};
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Model-based joint signal control: networks, training, evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mujam_version()));

  std::string config_path;
  std::vector<std::string> overrides;
  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Flat key = value configuration file");
    cmd->add_option("--set", overrides, "Override one setting, key=value (repeatable)");
  };

  // gen-net
  std::uint64_t seed = 0;
  int count = 1, min_x = 2, max_x = 6;
  std::string out;
  auto* gen_net = app.add_subcommand("gen-net", "Generate random road networks");
  gen_net->add_option("--seed", seed, "Base seed");
  gen_net->add_option("--count", count, "Number of networks")->check(CLI::PositiveNumber);
  gen_net->add_option("--min-intersections", min_x)->check(CLI::PositiveNumber);
  gen_net->add_option("--max-intersections", max_x)->check(CLI::PositiveNumber);
  gen_net->add_option("--out", out, "Output directory")->required();

  // gen-trips
  std::string net_path;
  int minutes = 10;
  double rate = 0.25;
  auto* gen_trips = app.add_subcommand("gen-trips", "Generate trips for a network or a directory of networks");
  gen_trips->add_option("--net", net_path, "Network file or directory")->required();
  gen_trips->add_option("--minutes", minutes, "Demand horizon")->check(CLI::PositiveNumber);
  gen_trips->add_option("--rate", rate, "Per-second insertion probability of each network");
  gen_trips->add_option("--seed", seed, "Base seed");
  gen_trips->add_option("--out", out, "Output directory")->required();

  // train
  std::string method;
  int seed_index = -1;
  auto* train = app.add_subcommand("train", "Train a learned method (every repetition unless --seed-index)");
  train->add_option("--method", method, "mfgrl, mujam, mujam-c, mujam-a, muim, mujam-nnl or mujam-nr")->required();
  train->add_option("--seed-index", seed_index, "Train one repetition only");
  train->add_option("--out", out, "Output directory")->required();
  add_config(train);

  // eval
  std::string ckpt, nets_dir, trips_dir;
  auto* eval = app.add_subcommand("eval", "Evaluate one method on the test networks");
  eval->add_option("--method", method, "Method name")->required();
  eval->add_option("--ckpt", ckpt, "Checkpoint file or training directory");
  eval->add_option("--nets", nets_dir, "Directory of network files");
  eval->add_option("--trips", trips_dir, "Directory of trip files named like the networks");
  eval->add_option("--out", out, "Output directory")->required();
  add_config(eval);

  // compare
  std::string methods, ref, runs_root;
  std::vector<std::string> run_dirs;
  auto* compare = app.add_subcommand("compare", "Merge evaluation reports and compare against a reference");
  compare->add_option("--methods", methods, "Comma-separated names of run directories under --runs");
  compare->add_option("--runs", runs_root, "Directory holding one evaluation directory per method");
  compare->add_option("--dirs", run_dirs, "Explicit evaluation directories");
  compare->add_option("--ref", ref, "Reference label")->required();
  compare->add_option("--out", out, "Output directory")->required();

  // smoke
  auto* smoke = app.add_subcommand("smoke", "Grid smoke test against fixed time");
  smoke->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  smoke->add_option("--out", out, "Output directory")->required();
  add_config(smoke);

  // show-config
  auto* show = app.add_subcommand("show-config", "Print every setting with its value");
  add_config(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return MUJAM_ERR_CONFIG;
  }

  try {
    if (*gen_net) {
      if (max_x < min_x) {
        std::fprintf(stderr, "mujam: configuration error: --max-intersections below --min-intersections\n");
        return MUJAM_ERR_CONFIG;
      }
      make_dirs(out);
      for (int i = 0; i < count; ++i) {
        mujam_network* n = nullptr;
        check(mujam_network_generate(seed + static_cast<std::uint64_t>(i), min_x, max_x, &n));
        NetworkPtr net(n);
        char name[32];
        std::snprintf(name, sizeof name, "net_%03d.json", i);
        check(mujam_network_save(net.get(), (fs::path(out) / name).string().c_str()));
      }
      std::printf("wrote %d networks to %s\n", count, out.c_str());
    } else if (*gen_trips) {
      std::vector<fs::path> nets;
      if (fs::is_directory(net_path)) {
        for (const auto& e : fs::directory_iterator(net_path))
          if (e.path().extension() == ".json") nets.push_back(e.path());
        std::sort(nets.begin(), nets.end());
      } else if (fs::exists(net_path)) {
        nets.push_back(net_path);
      }
      if (nets.empty()) {
        std::fprintf(stderr, "mujam: missing artifact: no networks at %s\n", net_path.c_str());
        return MUJAM_ERR_MISSING_ARTIFACT;
      }
      make_dirs(out);
      for (std::size_t i = 0; i < nets.size(); ++i) {
        mujam_network* n = nullptr;
        check(mujam_network_load(nets[i].string().c_str(), &n));
        NetworkPtr net(n);
        int trips = 0;
        check(mujam_trips_generate(net.get(), seed + i, rate, minutes * 60,
                                   (fs::path(out) / nets[i].filename()).string().c_str(), &trips));
        std::printf("%s: %d trips\n", nets[i].filename().string().c_str(), trips);
      }
    } else if (*train) {
      ConfigPtr cfg = make_config(config_path, overrides);
      const int seeds = std::stoi(config_value(cfg.get(), "seeds"));
      const int first = seed_index >= 0 ? seed_index : 0;
      const int last = seed_index >= 0 ? seed_index : seeds - 1;
      for (int s = first; s <= last; ++s) {
        const std::string dir = (fs::path(out) / ("seed_" + std::to_string(s))).string();
        std::printf("training %s repetition %d into %s\n", method.c_str(), s, dir.c_str());
        std::fflush(stdout);
        check(mujam_train(cfg.get(), method.c_str(), s, dir.c_str()));
      }
    } else if (*eval) {
      ConfigPtr cfg = make_config(config_path, overrides);
      check(mujam_eval(cfg.get(), method.c_str(), ckpt.empty() ? nullptr : ckpt.c_str(),
                       nets_dir.empty() ? nullptr : nets_dir.c_str(), trips_dir.empty() ? nullptr : trips_dir.c_str(),
                       out.c_str()));
      std::printf("wrote %s/summary.csv\n", out.c_str());
    } else if (*compare) {
      std::vector<std::string> dirs = run_dirs;
      for (const std::string& m : split(methods)) dirs.push_back((fs::path(runs_root.empty() ? "." : runs_root) / m).string());
      if (dirs.empty()) {
        std::fprintf(stderr, "mujam: configuration error: give --methods or --dirs\n");
        return MUJAM_ERR_CONFIG;
      }
      std::vector<const char*> ptrs;
      for (const std::string& d : dirs) ptrs.push_back(d.c_str());
      check(mujam_compare(ptrs.data(), ptrs.size(), ref.c_str(), out.c_str()));
      std::printf("wrote %s/summary.csv\n", out.c_str());
    } else if (*smoke) {
      ConfigPtr cfg = make_config(config_path, overrides);
      check(mujam_smoke(cfg.get(), ckpt.c_str(), out.c_str()));
      std::printf("wrote %s/smoke.csv\n", out.c_str());
    } else if (*show) {
      ConfigPtr cfg = make_config(config_path, overrides);
      size_t needed = 0;
      check(mujam_config_to_text(cfg.get(), nullptr, 0, &needed));
      std::string text(needed, '\0');
      check(mujam_config_to_text(cfg.get(), text.data(), text.size(), &needed));
      std::fputs(text.c_str(), stdout);
    }
  } catch (const Failure& f) {
    return f.code;
  }
  return 0;
}

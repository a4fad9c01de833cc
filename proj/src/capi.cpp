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

#include "mujam/mujam.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "mujam/bench.hpp"

struct mujam_config {
  mujam::ExperimentConfig cfg;
};

struct mujam_network {
  std::shared_ptr<mujam::RoadNetwork> net;
};

struct mujam_sim {
  mujam::SimState state;
};

struct mujam_model {
  mujam::ModelParams params;
};

namespace {

namespace fs = std::filesystem;
using namespace mujam;

thread_local std::string g_last_error;

// Argument problems raised inside the API layer.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

template <typename F>
mujam_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return MUJAM_OK;
  } catch (const InvalidArgument& e) {
    g_last_error = e.what();
    return MUJAM_ERR_INVALID_ARGUMENT;
  } catch (const ConfigError& e) {
    g_last_error = e.what();
    return MUJAM_ERR_CONFIG;
  } catch (const MissingArtifact& e) {
    g_last_error = e.what();
    return MUJAM_ERR_MISSING_ARTIFACT;
  } catch (const IllegalAction& e) {
    g_last_error = e.what();
    return MUJAM_ERR_ILLEGAL_ACTION;
  } catch (const IoError& e) {
    g_last_error = e.what();
    return MUJAM_ERR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return MUJAM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MUJAM_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MUJAM_ERR_INTERNAL;
  }
}

template <typename T>
T& require(T* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " is null");
  return *p;
}

std::string require_str(const char* s, const char* what) {
  if (!s || !*s) throw InvalidArgument(std::string(what) + " is empty");
  return s;
}

void copy_out(const std::string& s, char* buf, size_t cap, size_t* needed) {
  if (needed) *needed = s.size() + 1;
  if (!buf) {
    if (cap != 0) throw InvalidArgument("buffer is null");
    if (!needed) throw InvalidArgument("buffer and needed are both null");
    return;
  }
  if (cap < s.size() + 1) throw InvalidArgument("buffer too small");
  std::memcpy(buf, s.c_str(), s.size() + 1);
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

ModelParams load_model_file(const std::string& path) {
  if (!fs::exists(path)) throw MissingArtifact("checkpoint not found: " + path);
  return load_checkpoint(path);
}

}  // namespace

extern "C" {

const char* mujam_version(void) { return "1.0.0"; }

const char* mujam_last_error(void) { return g_last_error.c_str(); }

const char* mujam_status_name(mujam_status s) {
  switch (s) {
    case MUJAM_OK:
      return "ok";
    case MUJAM_ERR_INTERNAL:
      return "internal error";
    case MUJAM_ERR_CONFIG:
      return "configuration error";
    case MUJAM_ERR_MISSING_ARTIFACT:
      return "missing artifact";
    case MUJAM_ERR_ILLEGAL_ACTION:
      return "illegal action";
    case MUJAM_ERR_IO:
      return "i/o error";
    case MUJAM_ERR_INVALID_ARGUMENT:
      return "invalid argument";
  }
  return "unknown status";
}

// ---------------------------------------------------------------------------
// Config

mujam_status mujam_config_create(mujam_config** out) {
  return guarded([&] { require(out, "out") = new mujam_config{}; });
}

mujam_status mujam_config_load(const char* path, mujam_config** out) {
  return guarded([&] {
    mujam_config*& o = require(out, "out");
    o = new mujam_config{load_config(require_str(path, "path"))};
  });
}

mujam_status mujam_config_set(mujam_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    ExperimentConfig next = require(cfg, "config").cfg;
    apply_setting(next, require_str(key, "key"), value ? value : "");
    next.validate();
    cfg->cfg = std::move(next);
  });
}

mujam_status mujam_config_get(const mujam_config* cfg, const char* key, char* buf, size_t cap, size_t* needed) {
  return guarded([&] {
    const std::string k = require_str(key, "key");
    const std::string text = config_to_text(require(cfg, "config").cfg);
    const std::string prefix = k + " = ";
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t end = text.find('\n', pos);
      const std::string line = text.substr(pos, end - pos);
      if (line.rfind(prefix, 0) == 0) {
        copy_out(line.substr(prefix.size()), buf, cap, needed);
        return;
      }
      pos = end + 1;
    }
    throw ConfigError("unknown config key '" + k + "'");
  });
}

mujam_status mujam_config_to_text(const mujam_config* cfg, char* buf, size_t cap, size_t* needed) {
  return guarded([&] { copy_out(config_to_text(require(cfg, "config").cfg), buf, cap, needed); });
}

void mujam_config_destroy(mujam_config* cfg) { delete cfg; }

// ---------------------------------------------------------------------------
// Networks and trips

mujam_status mujam_network_generate(uint64_t seed, int min_intersections, int max_intersections,
                                    mujam_network** out) {
  return guarded([&] {
    mujam_network*& o = require(out, "out");
    if (min_intersections < 1 || max_intersections < min_intersections)
      throw ConfigError("invalid intersection range");
    NetworkGenConfig g;
    g.seed = seed;
    g.min_intersections = min_intersections;
    g.max_intersections = max_intersections;
    o = new mujam_network{std::make_shared<RoadNetwork>(generate_network(g))};
  });
}

mujam_status mujam_network_load(const char* path, mujam_network** out) {
  return guarded([&] {
    mujam_network*& o = require(out, "out");
    const std::string p = require_str(path, "path");
    if (!fs::exists(p)) throw MissingArtifact("network not found: " + p);
    o = new mujam_network{std::make_shared<RoadNetwork>(load_network(p))};
  });
}

mujam_status mujam_network_save(const mujam_network* net, const char* path) {
  return guarded([&] { save_network(*require(net, "network").net, require_str(path, "path")); });
}

mujam_status mujam_network_set_constraints(mujam_network* net, const char* mode, uint64_t seed) {
  return guarded([&] {
    mujam_network& n = require(net, "network");
    const ConstraintMode m = parse_constraint_mode(require_str(mode, "mode"));
    Rng rng(seed);
    apply_constraint_mode(*n.net, m, rng);
  });
}

mujam_status mujam_network_num_intersections(const mujam_network* net, int* out) {
  return guarded([&] { require(out, "out") = require(net, "network").net->num_intersections(); });
}

mujam_status mujam_network_num_lanes(const mujam_network* net, int* out) {
  return guarded([&] { require(out, "out") = static_cast<int>(require(net, "network").net->lanes.size()); });
}

void mujam_network_destroy(mujam_network* net) { delete net; }

mujam_status mujam_trips_generate(const mujam_network* net, uint64_t seed, double rate, int seconds,
                                  const char* path, int* count) {
  return guarded([&] {
    const RoadNetwork& n = *require(net, "network").net;
    if (!(rate > 0 && rate <= 1)) throw ConfigError("trip rate must lie in (0, 1]");
    if (seconds < 1) throw ConfigError("trip horizon must be >= 1 second");
    const std::vector<Trip> trips = generate_trips(n, make_trip_process(n, seed, rate), seconds);
    save_trips(trips, require_str(path, "path"));
    if (count) *count = static_cast<int>(trips.size());
  });
}

// ---------------------------------------------------------------------------
// Simulation

mujam_status mujam_sim_create(const mujam_network* net, const char* trips_path, mujam_sim** out) {
  return guarded([&] {
    mujam_sim*& o = require(out, "out");
    std::vector<Trip> trips;
    if (trips_path && *trips_path) {
      if (!fs::exists(trips_path)) throw MissingArtifact(std::string("trips not found: ") + trips_path);
      trips = load_trips(trips_path);
    }
    o = new mujam_sim{SimState(require(net, "network").net, std::move(trips))};
  });
}

mujam_status mujam_sim_legal_phases(const mujam_sim* sim, int intersection, int* buf, size_t cap, size_t* count) {
  return guarded([&] {
    const SimState& s = require(sim, "sim").state;
    if (intersection < 0 || intersection >= s.network().num_intersections())
      throw InvalidArgument("intersection out of range");
    const std::vector<int> legal = legal_phases(s, intersection);
    if (count) *count = legal.size();
    if (!buf) {
      if (!count) throw InvalidArgument("buffer and count are both null");
      return;
    }
    if (cap < legal.size()) throw InvalidArgument("buffer too small");
    std::copy(legal.begin(), legal.end(), buf);
  });
}

mujam_status mujam_sim_current_phase(const mujam_sim* sim, int intersection, int* out) {
  return guarded([&] {
    const SimState& s = require(sim, "sim").state;
    if (intersection < 0 || intersection >= s.network().num_intersections())
      throw InvalidArgument("intersection out of range");
    require(out, "out") = signal::effective_phase(s.controller(intersection));
  });
}

mujam_status mujam_sim_step(mujam_sim* sim, const int* phases, size_t n, double* global_reward, double* delay) {
  return guarded([&] {
    SimState& s = require(sim, "sim").state;
    if (n != static_cast<size_t>(s.network().num_intersections()))
      throw InvalidArgument("expected one phase per intersection");
    if (n > 0 && !phases) throw InvalidArgument("phases is null");
    JointAction a;
    a.phases.assign(phases, phases + n);
    const StepOutcome o = s.step(a);
    if (global_reward) *global_reward = o.global_reward;
    if (delay) *delay = o.delay;
  });
}

mujam_status mujam_sim_clock(const mujam_sim* sim, int* out) {
  return guarded([&] { require(out, "out") = require(sim, "sim").state.clock(); });
}

mujam_status mujam_sim_completed(const mujam_sim* sim, int* count, int* all_done) {
  return guarded([&] {
    const SimState& s = require(sim, "sim").state;
    if (count) *count = static_cast<int>(s.completed().size());
    if (all_done) *all_done = s.all_trips_done() ? 1 : 0;
  });
}

void mujam_sim_destroy(mujam_sim* sim) { delete sim; }

// ---------------------------------------------------------------------------
// Models

mujam_status mujam_model_create(const mujam_config* cfg, uint64_t seed, mujam_model** out) {
  return guarded([&] {
    mujam_model*& o = require(out, "out");
    Rng rng(seed);
    o = new mujam_model{initial_params(require(cfg, "config").cfg.hp, rng)};
  });
}

mujam_status mujam_model_load(const char* path, mujam_model** out) {
  return guarded([&] {
    mujam_model*& o = require(out, "out");
    o = new mujam_model{load_model_file(require_str(path, "path"))};
  });
}

mujam_status mujam_model_save(const mujam_model* model, const char* path) {
  return guarded([&] { save_checkpoint(require(model, "model").params, require_str(path, "path")); });
}

mujam_status mujam_act(const mujam_config* cfg, const char* method, const mujam_model* model, const mujam_sim* sim,
                       int* phases, size_t n) {
  return guarded([&] {
    const ExperimentConfig& c = require(cfg, "config").cfg;
    const SimState& s = require(sim, "sim").state;
    const Method m = parse_method(require_str(method, "method"));
    if (n != static_cast<size_t>(s.network().num_intersections()))
      throw InvalidArgument("expected one phase per intersection");
    if (n > 0 && !phases) throw InvalidArgument("phases is null");
    Rng rng(derive_seed(c.seed, "act"));
    const Policy policy = make_policy(m, model ? &model->params : nullptr, c, rng);
    const JointAction a = policy(s);
    std::copy(a.phases.begin(), a.phases.end(), phases);
  });
}

void mujam_model_destroy(mujam_model* model) { delete model; }

// ---------------------------------------------------------------------------
// Workflows

mujam_status mujam_train(const mujam_config* cfg, const char* method, int seed_index, const char* out_dir) {
  return guarded([&] {
    const ExperimentConfig& c = require(cfg, "config").cfg;
    const Method m = parse_method(require_str(method, "method"));
    if (!is_learned(m)) throw ConfigError(std::string(method_name(m)) + " has nothing to train");
    if (seed_index < 0) throw InvalidArgument("seed_index must be >= 0");
    const std::string dir = require_str(out_dir, "out_dir");
    ensure_dir(dir);
    const HyperParams hp = hyperparams_for(m, c, seed_index);
    std::ofstream log(fs::path(dir) / "log.csv");
    if (!log) throw IoError("cannot write " + dir + "/log.csv");
    TrainOptions opts;
    opts.checkpoint_dir = (fs::path(dir) / "checkpoints").string();
    opts.log = &log;
    opts.record_wall_time = c.record_wall_time;
    const TrainResult r = train_method(m, hp, opts);
    save_checkpoint(r.best, (fs::path(dir) / "best.mjck").string());
    save_checkpoint(r.last, (fs::path(dir) / "last.mjck").string());
  });
}

mujam_status mujam_eval(const mujam_config* cfg, const char* method, const char* checkpoint, const char* nets_dir,
                        const char* trips_dir, const char* out_dir) {
  return guarded([&] {
    ExperimentConfig c = require(cfg, "config").cfg;
    const Method m = parse_method(require_str(method, "method"));
    const std::string out = require_str(out_dir, "out_dir");
    c.methods = {m};
    c.reference = m;

    std::map<Method, std::vector<ModelParams>> models;
    std::map<std::string, std::vector<EvalPoint>> curves;
    if (is_learned(m)) {
      if (!checkpoint || !*checkpoint)
        throw MissingArtifact(std::string("a checkpoint is required to evaluate ") + method_name(m));
      const std::string ck = checkpoint;
      if (!fs::exists(ck)) throw MissingArtifact("checkpoint not found: " + ck);
      auto& v = models[m];
      if (fs::is_directory(ck)) {
        for (int s = 0; s < c.seeds; ++s) {
          const fs::path sd = fs::path(ck) / ("seed_" + std::to_string(s));
          v.push_back(load_model_file((sd / "best.mjck").string()));
          if (fs::exists(sd / "log.csv"))
            curves[std::string(method_name(m)) + "#" + std::to_string(s)] = load_training_log((sd / "log.csv").string());
        }
      } else {
        v.push_back(load_model_file(ck));
      }
    }

    const bool given_nets = nets_dir && *nets_dir;
    const bool given_trips = trips_dir && *trips_dir;
    if (given_nets != given_trips) throw ConfigError("networks and trips must be given together");
    MetricsReport report;
    if (given_nets) {
      if (!fs::is_directory(nets_dir)) throw MissingArtifact(std::string("network directory not found: ") + nets_dir);
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(nets_dir))
        if (e.path().extension() == ".json") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) throw MissingArtifact(std::string("no networks in ") + nets_dir);
      TestSet tests;
      tests.trips.emplace_back();
      for (const fs::path& f : files) {
        const fs::path t = fs::path(trips_dir) / f.filename();
        if (!fs::exists(t)) throw MissingArtifact("trips not found: " + t.string());
        tests.nets.push_back(std::make_shared<RoadNetwork>(load_network(f.string())));
        tests.trips[0].push_back(load_trips(t.string()));
      }
      report = run_experiment1(c, models, tests);
    } else {
      report = run_experiment1(c, models);
    }
    report.training = std::move(curves);
    export_report(report, out);
  });
}

mujam_status mujam_compare(const char* const* run_dirs, size_t n, const char* reference, const char* out_dir) {
  return guarded([&] {
    if (n == 0 || !run_dirs) throw InvalidArgument("no run directories");
    std::vector<MetricsReport> reports;
    for (size_t i = 0; i < n; ++i) reports.push_back(load_report(require_str(run_dirs[i], "run directory")));
    export_report(combine_reports(reports, require_str(reference, "reference")), require_str(out_dir, "out_dir"));
  });
}

mujam_status mujam_smoke(const mujam_config* cfg, const char* checkpoint, const char* out_dir) {
  return guarded([&] {
    const ExperimentConfig& c = require(cfg, "config").cfg;
    const ModelParams p = load_model_file(require_str(checkpoint, "checkpoint"));
    export_report(run_smoke_scale(c, p), require_str(out_dir, "out_dir"));
  });
}

}  // extern "C"

#pragma once

#include "ptqrm/records.hpp"

#include <json.hpp>

#include <atomic>
#include <exception>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace ptqrm::cli {

struct CommandResult {
  std::vector<std::pair<std::string, Table>> tables;  // written as <name>.csv
  std::map<std::string, nlohmann::json> documents;    // nested payloads, always JSON
  std::vector<std::string> methods;
  std::vector<std::string> notes;                     // printed after the run
};

CommandResult cmd_spectrum(const RunConfig& cfg);
CommandResult cmd_gscan(const RunConfig& cfg);
CommandResult cmd_ep(const RunConfig& cfg);
CommandResult cmd_dynamics(const RunConfig& cfg);
CommandResult cmd_emission(const RunConfig& cfg);
CommandResult cmd_qfi(const RunConfig& cfg);
CommandResult cmd_preptime(const RunConfig& cfg);

CommandResult run_command(const RunConfig& cfg);

// Writes the payload files and <command>.meta.json into cfg.out_dir; returns
// the paths written. Payload bytes depend only on the configuration.
std::vector<std::string> write_result(const RunConfig& cfg, const CommandResult& result);

// The standard survey: every command on its reference parameter set, each in its own
// subdirectory of out_dir. quick shrinks grids and sweeps.
std::vector<std::string> reproduce(const std::string& out_dir, const std::string& format, bool quick);

// PTQRM_NUM_WORKERS, default hardware concurrency; ConfigError when malformed.
int worker_count();

// Order-stable parallel map over [0, n). The exception of the lowest failing
// index is rethrown.
template <class F>
auto parallel_map(std::size_t n, F&& f) -> std::vector<decltype(f(std::size_t{}))> {
  using R = decltype(f(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(f(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace ptqrm::cli

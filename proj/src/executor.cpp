#include "depdb/executor.hpp"

#include <algorithm>
#include <deque>
#include <thread>

namespace depdb {

void ContextTable::prepare(const DependencyGraph& graph) {
  for (const auto& v : graph.vertices) table_[v.action.id.txn];
}

TxnContext& ContextTable::at(const TxnId& id) {
  auto it = table_.find(id);
  if (it == table_.end()) throw Error(ErrorCode::invalid_config, "no context prepared for " + to_string(id));
  return it->second;
}

void Latches::wait(std::uint32_t v) const {
  while (done_[v].load(std::memory_order_acquire) == 0) done_[v].wait(0, std::memory_order_acquire);
}

void Latches::signal(std::uint32_t v) {
  done_[v].store(1, std::memory_order_release);
  done_[v].notify_all();
}

std::vector<std::pair<std::uint32_t, ExecutedVertex>> execute_schedule(Store& store, const Registry& registry,
                                                                       const DependencyGraph& graph,
                                                                       const Schedule& schedule,
                                                                       ContextTable& contexts, Latches& latches) {
  std::vector<std::pair<std::uint32_t, ExecutedVertex>> out;
  out.reserve(schedule.vertices.size());
  for (auto v : schedule.vertices) {
    for (auto ei : graph.in_edges(v)) latches.wait(graph.edges()[ei].from);
    const auto& action = graph.vertices[v].action;
    ExecutedVertex ev;
    ev.exec = apply_action(store, registry, action, contexts.at(action.id.txn));
    ev.worker = schedule.worker;
    ev.completion = latches.next_completion();
    latches.signal(v);
    out.emplace_back(v, std::move(ev));
  }
  return out;
}

std::vector<ExecutedVertex> run_graph_threaded(Store& store, const Registry& registry, const DependencyGraph& graph,
                                               std::span<const Schedule> schedules, ContextTable& contexts) {
  Latches latches(graph.size());
  std::vector<std::vector<std::pair<std::uint32_t, ExecutedVertex>>> parts(schedules.size());
  std::vector<std::exception_ptr> errors(schedules.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < schedules.size(); ++w) {
      threads.emplace_back([&, w] {
        try {
          parts[w] = execute_schedule(store, registry, graph, schedules[w], contexts, latches);
        } catch (...) {
          errors[w] = std::current_exception();
          // Unblock anyone waiting on the rest of this schedule.
          for (auto v : schedules[w].vertices) latches.signal(v);
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<ExecutedVertex> out(graph.size());
  for (auto& part : parts) {
    for (auto& [v, ev] : part) out[v] = std::move(ev);
  }
  return out;
}

ScheduleTiming time_schedules(const DependencyGraph& graph, std::span<const Schedule> schedules, std::uint64_t cost,
                              std::uint64_t start) {
  ScheduleTiming out;
  out.timing.resize(graph.size());
  out.end = start;
  std::vector<std::uint8_t> scheduled(graph.size(), 0), finished(graph.size(), 0);
  std::size_t total = 0;
  for (const auto& s : schedules) {
    for (auto v : s.vertices) scheduled[v] = 1;
    total += s.vertices.size();
  }
  std::vector<std::size_t> cursor(schedules.size(), 0);
  std::vector<std::uint64_t> free_at(schedules.size(), start);
  std::vector<std::uint32_t> dispatch;
  dispatch.reserve(total);

  while (dispatch.size() < total) {
    bool progressed = false;
    for (std::size_t w = 0; w < schedules.size(); ++w) {
      while (cursor[w] < schedules[w].vertices.size()) {
        auto v = schedules[w].vertices[cursor[w]];
        std::uint64_t ready = free_at[w];
        bool blocked = false;
        for (auto ei : graph.in_edges(v)) {
          auto from = graph.edges()[ei].from;
          if (!scheduled[from]) continue;
          if (!finished[from]) {
            blocked = true;
            break;
          }
          ready = std::max(ready, out.timing[from].finish);
        }
        if (blocked) break;
        out.timing[v] = VertexTiming{ready, ready + cost, schedules[w].worker};
        free_at[w] = ready + cost;
        finished[v] = 1;
        dispatch.push_back(v);
        ++cursor[w];
        progressed = true;
      }
    }
    if (!progressed) throw Error(ErrorCode::invalid_config, "schedules deadlock: graph is cyclic");
  }

  std::vector<std::size_t> rank(graph.size(), 0);
  for (std::size_t i = 0; i < dispatch.size(); ++i) rank[dispatch[i]] = i;
  out.completion_order = dispatch;
  std::sort(out.completion_order.begin(), out.completion_order.end(), [&](auto a, auto b) {
    return std::pair(out.timing[a].finish, rank[a]) < std::pair(out.timing[b].finish, rank[b]);
  });
  for (auto v : dispatch) out.end = std::max(out.end, out.timing[v].finish);
  return out;
}

VirtualRun run_graph_virtual(Store& store, const Registry& registry, const DependencyGraph& graph,
                             std::span<const std::uint32_t> subset, unsigned workers, std::uint64_t cost,
                             std::uint64_t start, ContextTable& contexts, std::vector<ExecutedVertex>& executed,
                             std::uint64_t& completion_counter) {
  std::vector<Schedule> schedules;
  if (subset.empty()) {
    schedules = derive_schedules(graph, workers);
  } else {
    schedules = derive_schedules(graph, workers, subset);
  }
  auto timing = time_schedules(graph, schedules, cost, start);
  if (executed.size() < graph.size()) executed.resize(graph.size());
  for (auto v : timing.completion_order) {
    const auto& action = graph.vertices[v].action;
    auto& ev = executed[v];
    ev.exec = apply_action(store, registry, action, contexts.at(action.id.txn));
    ev.worker = timing.timing[v].worker;
    ev.completion = completion_counter++;
  }
  return VirtualRun{std::move(timing.completion_order), timing.end};
}

WaveRunner::WaveRunner(const DependencyGraph& graph)
    : graph_(graph),
      local_pending_(graph.size(), 0),
      remote_pending_(graph.size(), 0),
      taken_(graph.size(), 0),
      remaining_(graph.size()) {
  for (const auto& e : graph.edges()) ++local_pending_[e.to];
  for (const auto& dep : graph.remote_in) {
    ++remote_pending_[dep.vertex];
    waiting_on_[dep.remote].push_back(dep.vertex);
  }
}

void WaveRunner::remote_done(const ActionId& remote) {
  auto it = waiting_on_.find(remote);
  if (it == waiting_on_.end()) return;
  for (auto v : it->second) --remote_pending_[v];
  waiting_on_.erase(it);
}

std::vector<std::uint32_t> WaveRunner::take_wave() {
  std::vector<std::uint32_t> wave;
  std::deque<std::uint32_t> ready;
  for (std::uint32_t v = 0; v < graph_.size(); ++v) {
    if (!taken_[v] && local_pending_[v] == 0 && remote_pending_[v] == 0) ready.push_back(v);
  }
  while (!ready.empty()) {
    auto v = ready.front();
    ready.pop_front();
    taken_[v] = 1;
    --remaining_;
    wave.push_back(v);
    for (auto ei : graph_.out_edges(v)) {
      auto to = graph_.edges()[ei].to;
      if (--local_pending_[to] == 0 && remote_pending_[to] == 0) ready.push_back(to);
    }
  }
  return wave;
}

EpochResult run_local_epoch(Store& store, const Registry& registry, EpochId epoch, std::span<const Transaction> batch,
                            const KeyOwnership& owner, const LocalEpochOptions& options) {
  EpochResult result;
  result.epoch = epoch;
  auto decomposed = decompose_batch(registry, batch);
  result.graph = build_graph(epoch, decomposed, owner, BuildOptions{options.constructors});
  auto schedules = derive_schedules(result.graph, options.workers);
  auto timing = time_schedules(result.graph, schedules, options.action_cost, 0);
  ContextTable contexts;
  contexts.prepare(result.graph);
  if (options.threaded) {
    result.effects = run_graph_threaded(store, registry, result.graph, schedules, contexts);
  } else {
    result.effects.resize(result.graph.size());
    std::uint64_t counter = 0;
    for (auto v : timing.completion_order) {
      const auto& action = result.graph.vertices[v].action;
      auto& ev = result.effects[v];
      ev.exec = apply_action(store, registry, action, contexts.at(action.id.txn));
      ev.worker = timing.timing[v].worker;
      ev.completion = counter++;
    }
  }
  result.span = timing.end;
  for (const auto& t : batch) result.txns.push_back(TxnOutcome{t.id, true, timing.end});
  return result;
}

}  // namespace depdb

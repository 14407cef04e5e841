#include "convdl/dist/runtime.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <mutex>
#include <random>
#include <thread>

#include <json.hpp>

namespace convdl::dist {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string RunStats::to_json() const {
  nlohmann::json j;
  j["workers"] = workers;
  j["grid"] = std::vector<index_t>(grid_axes.begin(), grid_axes.begin() + grid_dim);
  j["accepted"] = accepted;
  j["soft_locked"] = soft_locked;
  j["messages"] = messages;
  j["emitting_commits"] = emitting_commits;
  j["t_sec"] = t_sec;
  j["objective"] = objective;
  j["converged"] = converged;
  j["aborted"] = aborted;
  if (!abort_reason.empty()) j["abort_reason"] = abort_reason;
  j["per_worker"] = nlohmann::json::array();
  for (const auto& w : per_worker) {
    j["per_worker"].push_back({{"iterations", w.iterations},
                               {"accepted", w.accepted},
                               {"soft_locked", w.soft_locked},
                               {"messages_sent", w.messages_sent},
                               {"t_sec", w.t_sec}});
  }
  return j.dump();
}

bool convergence_consensus(std::span<const WorkerSnapshot> workers,
                           index_t in_flight_messages) {
  if (in_flight_messages != 0) return false;
  for (const auto& w : workers)
    if (!w.paused) return false;
  return true;
}

index_t count_interfering_pairs(const RunTrace& trace, const Domain& theta) {
  // apply time of update (from, seq) at worker `to`
  std::map<std::tuple<int, std::uint64_t, int>, std::uint64_t> applied;
  for (const auto& d : trace.deliveries)
    if (d.update) applied[{d.from, d.seq, d.to}] = d.apply_time;

  auto overlap = [&](const Pos& a, const Pos& b) {
    for (int i = 0; i < theta.d; ++i)
      if (std::llabs(a[i] - b[i]) >= theta.sizes[i]) return false;
    return true;
  };

  index_t pairs = 0;
  for (std::size_t i = 0; i < trace.commits.size(); ++i) {
    const auto& a = trace.commits[i];
    for (std::size_t j = i + 1; j < trace.commits.size(); ++j) {
      const auto& b = trace.commits[j];
      if (a.worker == b.worker) continue;
      if (!overlap(a.pos, b.pos)) continue;
      const auto& earlier = a.time <= b.time ? a : b;
      const auto& later = a.time <= b.time ? b : a;
      const auto it = applied.find({earlier.worker, earlier.seq, later.worker});
      if (it == applied.end() || it->second > later.time) ++pairs;
    }
  }
  return pairs;
}

namespace {

enum class Status { kActive, kPaused, kDone, kAborted };

struct WorkerContext {
  virtual void send(int to, Message m) = 0;
  virtual bool inbox_empty() const = 0;
  virtual std::uint64_t now() const = 0;
  virtual void record_commit(const CommitRecord&) {}
  virtual ~WorkerContext() = default;
};

// One worker of the asynchronous solver. The same code runs on both backends;
// only message delivery and scheduling differ.
class Worker {
 public:
  Worker(int id, const grid::WorkerGrid& g, const csc::CoordKernel& kernel,
         double eps, const RunOptions& opts, csc::CscState slab_state,
         double divergence_threshold, std::atomic<index_t>* accepted_total)
      : id_(id),
        grid_(&g),
        kernel_(&kernel),
        eps_(eps),
        soft_locks_(opts.soft_locks),
        max_iter_(opts.max_iter),
        div_threshold_(divergence_threshold),
        accepted_total_(accepted_total),
        border_(g.subdomain(id), g.theta(), g.omega()),
        state_(std::move(slab_state)),
        view_(g.worker_count(), 0) {
    cells_ = csc::SubPartition::regular(border_.subdomain(), g.theta()).cells;
    const auto& snake = g.snake_order();
    for (std::size_t i = 0; i < snake.size(); ++i)
      if (snake[i] == id_) snake_pos_ = static_cast<int>(i);
    next_in_snake_ = snake_pos_ + 1 < g.worker_count()
                         ? snake[snake_pos_ + 1]
                         : -1;
    prev_in_snake_ = snake_pos_ > 0 ? snake[snake_pos_ - 1] : -1;
  }

  void attach(WorkerContext* ctx) { ctx_ = ctx; }

  Status status() const { return status_; }
  bool terminal() const {
    return status_ == Status::kDone || status_ == Status::kAborted;
  }
  std::uint64_t epoch() const { return epoch_; }
  const csc::CscState& state() const { return state_; }
  const grid::BorderGeometry& border() const { return border_; }
  WorkerStats& stats() { return stats_; }
  const std::string& abort_reason() const { return abort_reason_; }
  bool divergence_abort() const { return divergence_abort_; }

  void handle(const Message& msg) {
    std::visit(overloaded{[&](const UpdateMsg& m) { on_update(m); },
                          [&](const PauseAnnounce& a) { on_announce(a); },
                          [&](const WakeProbe& p) { on_probe(p); },
                          [&](const GlobalDone&) { on_done(); },
                          [&](const AbortMsg& a) { on_abort(a); }},
               msg);
  }

  // One cell visit; the backend drains the inbox first.
  void run_slice() {
    if (status_ == Status::kPaused && recheck_pending_) {
      recheck_pending_ = false;
      double worst = 0;
      for (const Box& cell : cells_) {
        const double mag = kernel_->best_in(state_, cell).abs_dz();
        if (mag > worst) worst = mag;
        if (worst >= eps_) break;
      }
      if (worst >= eps_) {
        ++epoch_;  // wake
        status_ = Status::kActive;
        visited_in_pass_ = 0;
        pass_max_ = 0;
      } else if (snake_pos_ == 0) {
        maybe_launch_probe(false);  // quiet absorption; view may have moved
      }
      return;
    }
    if (status_ != Status::kActive) return;
    ++stats_.iterations;
    const Box& cell = cells_[cursor_];
    const csc::CandidateUpdate u = kernel_->best_in(state_, cell);
    const double mag = u.abs_dz();
    if (mag > pass_max_) pass_max_ = mag;

    bool commit_ok = mag >= eps_;
    if (commit_ok && soft_locks_ && border_.in_border_L(u.pos) &&
        !soft_lock_ok(u)) {
      ++stats_.soft_locked;
      commit_ok = false;
    }
    if (commit_ok) commit(u);
    if (terminal()) return;  // commit may abort on divergence

    cursor_ = (cursor_ + 1) % cells_.size();
    if (++visited_in_pass_ == static_cast<index_t>(cells_.size())) {
      const bool clean = pass_max_ < eps_;
      visited_in_pass_ = 0;
      pass_max_ = 0;
      if (clean && ctx_->inbox_empty()) enter_paused();
    }
  }

 private:
  void on_update(const UpdateMsg& m) {
    if (terminal()) return;
    ++recv_updates_;
    // Emission on the extended border means the position itself may lie past
    // our extension ring; only its neighborhood must reach our slab.
    if (!kernel_->neighborhood(m.pos).intersects(border_.slab()))
      throw ProtocolError("worker " + std::to_string(id_) +
                          " received an update that cannot touch its slab");
    if (border_.in_extension(m.pos)) {
      double& zv = state_.z_at(m.atom, m.pos);
      zv += m.dz;
      const double own = state_.beta_at(m.atom, m.pos);
      kernel_->propagate_beta(state_, m.atom, m.pos, m.dz);
      state_.beta_at(m.atom, m.pos) = own;
      if (std::abs(zv) > div_threshold_) {
        initiate_abort("code amplitude exceeded the divergence guard (mirror)",
                       true);
        return;
      }
    } else {
      // beta bookkeeping only; we do not hold Z at that position
      kernel_->propagate_beta(state_, m.atom, m.pos, m.dz);
    }
    // an applied update invalidates the current pass; a paused worker first
    // bumps its episode (so stale probes die) and rechecks quietly before
    // deciding whether there is new work
    visited_in_pass_ = 0;
    pass_max_ = 0;
    if (status_ == Status::kPaused && !recheck_pending_) {
      epoch_ += 2;  // still paused, new episode
      view_[id_] = epoch_;
      recheck_pending_ = true;
    }
  }

  void on_announce(const PauseAnnounce& a) {
    if (terminal()) return;
    if (a.epoch <= view_[a.origin]) return;  // old news
    view_[a.origin] = a.epoch;
    for (int n : grid_->neighbors(id_)) ctx_->send(n, a);
    maybe_launch_probe(false);
  }

  void on_probe(const WakeProbe& p) {
    if (terminal()) return;
    if (p.returning) {
      if (snake_pos_ == 0) {
        if (status_ == Status::kPaused) maybe_launch_probe(true);
      } else if (prev_in_snake_ >= 0) {
        ctx_->send(prev_in_snake_, p);
      }
      return;
    }
    if (status_ != Status::kPaused) return;  // will announce at the next pause
    if (p.epochs[static_cast<std::size_t>(id_)] != epoch_) {
      // quietly absorbed updates moved the episode; refresh the views so the
      // initiator can retry with current epochs
      const PauseAnnounce a{id_, epoch_};
      for (int n : grid_->neighbors(id_)) ctx_->send(n, a);
      return;
    }
    WakeProbe q = p;
    q.outstanding +=
        static_cast<long long>(sent_updates_) - static_cast<long long>(recv_updates_);
    if (next_in_snake_ >= 0) {
      ctx_->send(next_in_snake_, std::move(q));
    } else if (q.outstanding == 0) {
      on_done();
    } else if (prev_in_snake_ >= 0) {
      // updates are still in flight; bounce the probe back so the initiator
      // keeps retrying until the channels drain
      WakeProbe back;
      back.initiator = q.initiator;
      back.returning = true;
      ctx_->send(prev_in_snake_, std::move(back));
    }
  }

  void on_done() {
    if (terminal()) return;
    if (status_ == Status::kActive)
      throw ProtocolError("termination reached an active worker");
    status_ = Status::kDone;
    for (int n : grid_->neighbors(id_)) ctx_->send(n, GlobalDone{});
  }

  void on_abort(const AbortMsg& a) {
    if (terminal()) return;
    status_ = Status::kAborted;
    abort_reason_ = a.reason;
    divergence_abort_ = a.divergence;
    for (int n : grid_->neighbors(id_)) ctx_->send(n, a);
  }

  void initiate_abort(const std::string& reason, bool divergence) {
    on_abort(AbortMsg{reason, divergence});
  }

  void enter_paused() {
    ++epoch_;  // odd while paused
    status_ = Status::kPaused;
    view_[id_] = epoch_;
    const PauseAnnounce a{id_, epoch_};
    for (int n : grid_->neighbors(id_)) ctx_->send(n, a);
    maybe_launch_probe(false);
  }

  void maybe_launch_probe(bool force) {
    if (snake_pos_ != 0 || status_ != Status::kPaused) return;
    for (std::uint64_t e : view_)
      if (e == 0) return;  // somebody has never paused yet
    if (!force && view_ == last_probe_view_) return;
    last_probe_view_ = view_;
    WakeProbe p;
    p.initiator = id_;
    p.epochs = view_;
    p.outstanding =
        static_cast<long long>(sent_updates_) - static_cast<long long>(recv_updates_);
    if (next_in_snake_ >= 0)
      ctx_->send(next_in_snake_, std::move(p));
    else if (p.outstanding == 0)
      on_done();  // single worker
  }

  bool soft_lock_ok(const csc::CandidateUpdate& u) const {
    const Box v = kernel_->neighborhood(u.pos).intersect(border_.slab());
    std::vector<grid::Competitor> competitors;
    for_each_pos(v, [&](const Pos& w) {
      if (!border_.in_extension(w)) return;
      const int owner = grid_->owner(w);
      for (int k = 0; k < state_.atoms; ++k) {
        const csc::CandidateUpdate rival = kernel_->eval(state_, k, w);
        if (rival.abs_dz() > 0)
          competitors.push_back({rival.abs_dz(), owner});
      }
    });
    return grid::soft_lock_accepts(u.abs_dz(), id_, competitors);
  }

  void commit(const csc::CandidateUpdate& u) {
    kernel_->apply(state_, u);
    ++stats_.accepted;
    ++seq_;
    ctx_->record_commit({ctx_->now(), id_, u.atom, u.pos, u.dz, seq_});
    if (std::abs(u.new_value) > div_threshold_) {
      initiate_abort("code amplitude exceeded the divergence guard", true);
      return;
    }
    const auto recipients = grid::notify_set(u.pos, *grid_);
    if (!recipients.empty()) {
      ++stats_.emitting_commits;
      for (int to : recipients) {
        ctx_->send(to, UpdateMsg{u.atom, u.pos, u.dz, id_, seq_});
        ++stats_.messages_sent;
        ++sent_updates_;
      }
    }
    if (accepted_total_->fetch_add(1, std::memory_order_relaxed) + 1 >= max_iter_)
      initiate_abort("iteration budget exhausted", false);
  }

  int id_;
  const grid::WorkerGrid* grid_;
  const csc::CoordKernel* kernel_;
  double eps_;
  bool soft_locks_;
  index_t max_iter_;
  double div_threshold_;
  std::atomic<index_t>* accepted_total_;
  grid::BorderGeometry border_;
  csc::CscState state_;
  std::vector<Box> cells_;
  WorkerContext* ctx_ = nullptr;

  Status status_ = Status::kActive;
  std::uint64_t epoch_ = 0;
  std::vector<std::uint64_t> view_;
  std::vector<std::uint64_t> last_probe_view_;
  int snake_pos_ = 0;
  int next_in_snake_ = -1;
  int prev_in_snake_ = -1;
  bool recheck_pending_ = false;
  std::uint64_t seq_ = 0;
  std::uint64_t sent_updates_ = 0;
  std::uint64_t recv_updates_ = 0;
  std::size_t cursor_ = 0;
  index_t visited_in_pass_ = 0;
  double pass_max_ = 0;
  WorkerStats stats_;
  std::string abort_reason_;
  bool divergence_abort_ = false;
};

// --- deterministic event-loop backend ----------------------------------------

class DetBackend {
 public:
  DetBackend(std::vector<Worker>& workers, const RunOptions& opts)
      : workers_(workers),
        opts_(opts),
        rng_(opts.seed),
        inbox_(workers.size()),
        channels_(workers.size() * workers.size()),
        ctxs_() {
    ctxs_.reserve(workers.size());
    for (std::size_t i = 0; i < workers.size(); ++i) {
      ctxs_.emplace_back(this, static_cast<int>(i));
    }
    for (std::size_t i = 0; i < workers.size(); ++i)
      workers_[i].attach(&ctxs_[i]);
  }

  void run() {
    const auto t0 = std::chrono::steady_clock::now();
    for (;;) {
      if (all_terminal()) break;
      promote_ready();
      choices_.clear();
      for (std::size_t w = 0; w < workers_.size(); ++w) {
        if (workers_[w].terminal() && inbox_[w].empty()) continue;
        if (workers_[w].status() == Status::kActive || !inbox_[w].empty())
          choices_.push_back(static_cast<int>(w));
      }

      if (choices_.empty()) {
        if (waiting_.empty())
          throw ProtocolError("quiescent without global termination");
        now_ = waiting_.top().first;
        continue;
      }

      const int w = choices_[rng_() % choices_.size()];
      drain(w);
      workers_[w].run_slice();
      ++now_;
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    for (auto& w : workers_) w.stats().t_sec = dt;
  }

  // messages whose delay expired move into the receiving inbox (per-pair
  // order preserved; cross-pair order follows expiry time)
  void promote_ready() {
    while (!waiting_.empty() && waiting_.top().first <= now_) {
      const int c = waiting_.top().second;
      waiting_.pop();
      auto& q = channels_[c];
      Pending p = std::move(q.front());
      q.pop_front();
      if (!q.empty()) schedule_head(c);
      deliver_to_inbox(c % static_cast<int>(workers_.size()), std::move(p));
    }
  }

  void schedule_head(int channel) {
    waiting_.push({channels_[channel].front().deliver_at, channel});
  }

  // bitwise halo check: every mirrored extension value equals the owner's
  bool halo_exact() const {
    for (std::size_t w = 0; w < workers_.size(); ++w) {
      const auto& border = workers_[w].border();
      const auto& state = workers_[w].state();
      bool ok = true;
      for_each_pos(border.slab(), [&](const Pos& p) {
        if (!border.in_extension(p)) return;
        int owner = -1;
        for (std::size_t o = 0; o < workers_.size(); ++o)
          if (workers_[o].border().in_subdomain(p)) owner = static_cast<int>(o);
        for (int k = 0; k < state.atoms; ++k) {
          if (state.z_at(k, p) != workers_[owner].state().z_at(k, p)) ok = false;
          if (state.beta_at(k, p) != workers_[owner].state().beta_at(k, p))
            ok = false;
        }
      });
      if (!ok) return false;
    }
    return true;
  }

  index_t in_flight() const {
    index_t n = 0;
    for (const auto& q : channels_)
      for (const auto& p : q) n += std::holds_alternative<UpdateMsg>(p.msg);
    for (std::size_t w = 0; w < workers_.size(); ++w)
      for (const auto& p : inbox_[w]) n += std::holds_alternative<UpdateMsg>(p.msg);
    return n;
  }

 private:
  struct Pending {
    Message msg;
    std::uint64_t deliver_at = 0;
    std::uint64_t send_time = 0;
    int from = -1;
  };

  struct Ctx : WorkerContext {
    Ctx(DetBackend* r, int s) : rt(r), self(s) {}
    DetBackend* rt;
    int self;
    void send(int to, Message m) override { rt->send(self, to, std::move(m)); }
    bool inbox_empty() const override { return rt->inbox_[self].empty(); }
    std::uint64_t now() const override { return rt->now_; }
    void record_commit(const CommitRecord& c) override {
      if (rt->opts_.trace) rt->opts_.trace->commits.push_back(c);
    }
  };

  void send(int from, int to, Message m) {
    Pending p{std::move(m), now_ + 1, now_, from};
    if (opts_.max_delay > 0) {
      const int key = from * static_cast<int>(workers_.size()) + to;
      p.deliver_at = now_ + 1 + rng_() % (opts_.max_delay + 1);
      auto& q = channels_[key];
      if (!q.empty()) p.deliver_at = std::max(p.deliver_at, q.back().deliver_at);
      q.push_back(std::move(p));
      if (q.size() == 1) schedule_head(key);
    } else {
      deliver_to_inbox(to, std::move(p));
    }
  }

  void deliver_to_inbox(int to, Pending p) { inbox_[to].push_back(std::move(p)); }

  void drain(int w) {
    while (!inbox_[w].empty()) {
      Pending p = std::move(inbox_[w].front());
      inbox_[w].pop_front();
      if (opts_.trace) {
        const auto* upd = std::get_if<UpdateMsg>(&p.msg);
        opts_.trace->deliveries.push_back(DeliveryRecord{
            p.from, w, upd ? upd->seq : 0, p.send_time, now_, upd != nullptr});
      }
      workers_[w].handle(p.msg);
    }
  }

  bool all_terminal() const {
    for (const auto& w : workers_)
      if (!w.terminal()) return false;
    return true;
  }

  std::vector<Worker>& workers_;
  const RunOptions& opts_;
  std::mt19937_64 rng_;
  std::uint64_t now_ = 0;
  std::vector<std::deque<Pending>> inbox_;
  std::vector<std::deque<Pending>> channels_;  // indexed from * W + to
  std::priority_queue<std::pair<std::uint64_t, int>,
                      std::vector<std::pair<std::uint64_t, int>>,
                      std::greater<>> waiting_;
  std::vector<Ctx> ctxs_;
  std::vector<int> choices_;
};

// --- threaded backend ---------------------------------------------------------

class AsyncBackend {
 public:
  AsyncBackend(std::vector<Worker>& workers) : workers_(workers), boxes_(workers.size()) {
    ctxs_.reserve(workers.size());
    for (std::size_t i = 0; i < workers.size(); ++i)
      ctxs_.emplace_back(this, static_cast<int>(i));
    for (std::size_t i = 0; i < workers.size(); ++i)
      workers_[i].attach(&ctxs_[i]);
  }

  void run() {
    std::vector<std::thread> threads;
    errors_.assign(workers_.size(), nullptr);
    for (std::size_t w = 0; w < workers_.size(); ++w)
      threads.emplace_back([this, w] { worker_loop(static_cast<int>(w)); });
    for (auto& t : threads) t.join();
    for (auto& e : errors_)
      if (e) std::rethrow_exception(e);
  }

 private:
  struct Mailbox {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<Message> q;
  };

  struct Ctx : WorkerContext {
    Ctx(AsyncBackend* r, int s) : rt(r), self(s) {}
    AsyncBackend* rt;
    int self;
    void send(int to, Message m) override {
      auto& box = rt->boxes_[to];
      {
        std::lock_guard<std::mutex> lock(box.mu);
        box.q.push_back(std::move(m));
      }
      box.cv.notify_one();
    }
    bool inbox_empty() const override {
      auto& box = rt->boxes_[self];
      std::lock_guard<std::mutex> lock(box.mu);
      return box.q.empty();
    }
    std::uint64_t now() const override { return 0; }
  };

  void worker_loop(int w) {
    const auto t0 = std::chrono::steady_clock::now();
    Worker& worker = workers_[w];
    Mailbox& box = boxes_[w];
    try {
      while (!worker.terminal()) {
        std::deque<Message> batch;
        {
          std::unique_lock<std::mutex> lock(box.mu);
          if (box.q.empty() && worker.status() == Status::kPaused)
            box.cv.wait_for(lock, std::chrono::milliseconds(1));
          batch.swap(box.q);
        }
        for (auto& m : batch) {
          worker.handle(m);
          if (worker.terminal()) break;
        }
        if (worker.status() == Status::kActive) worker.run_slice();
      }
    } catch (...) {
      errors_[w] = std::current_exception();
      // release everybody so the join completes
      for (std::size_t o = 0; o < workers_.size(); ++o)
        if (static_cast<int>(o) != w)
          ctxs_[w].send(static_cast<int>(o),
                        AbortMsg{"internal error in worker " + std::to_string(w), false});
    }
    worker.stats().t_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }

  std::vector<Worker>& workers_;
  std::vector<Mailbox> boxes_;
  std::vector<Ctx> ctxs_;
  std::vector<std::exception_ptr> errors_;
};

}  // namespace

DistResult run_dicodile_z(const Signal& x, const Dictionary& dict, double lambda,
                          const grid::WorkerGrid& grid, const RunOptions& opts) {
  if (grid.omega() != x.domain)
    throw ShapeError("run: grid domain does not match the signal");
  if (lambda < 0) throw ConfigError("lambda must be nonnegative");
  if (opts.trace && opts.scheduler == Scheduler::kAsync)
    throw ConfigError("commit tracing requires the deterministic scheduler");

  csc::XCorrTable xc(dict, x.domain);
  xc.prepare_all();
  csc::CoordKernel kernel(xc, lambda);
  const double eps = opts.eps > 0 ? opts.eps : csc::default_eps(lambda, xc);

  csc::CscState full = opts.warm_start
                           ? csc::init_state_warm(x, dict, *opts.warm_start, xc, opts.conv)
                           : csc::init_state(x, dict, opts.conv);

  double div_threshold = std::numeric_limits<double>::infinity();
  for (int k = 0; k < dict.atoms; ++k) {
    const double m = dict.atom_max_abs(k);
    if (m > 0) div_threshold = std::min(div_threshold, opts.divergence_factor / m);
  }

  std::atomic<index_t> accepted_total{0};
  std::vector<Worker> workers;
  workers.reserve(grid.worker_count());
  for (int w = 0; w < grid.worker_count(); ++w) {
    grid::BorderGeometry bg(grid.subdomain(w), grid.theta(), grid.omega());
    workers.emplace_back(w, grid, kernel, eps, opts,
                         csc::slice_state(full, bg.slab()), div_threshold,
                         &accepted_total);
  }

  const auto t0 = std::chrono::steady_clock::now();
  bool halo_exact = false;
  if (opts.scheduler == Scheduler::kDeterministic) {
    DetBackend backend(workers, opts);
    backend.run();
    halo_exact = backend.halo_exact();
  } else {
    AsyncBackend backend(workers);
    backend.run();
  }

  DistResult out{ActivationMap(x.domain, dict.atoms), {}};
  for (auto& w : workers)
    csc::export_region(w.state(), w.border().subdomain(), out.z);

  RunStats& st = out.stats;
  st.workers = grid.worker_count();
  st.grid_axes = grid.axis_counts();
  st.grid_dim = x.domain.d;
  st.halo_exact = halo_exact;
  st.t_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  bool any_abort = false;
  bool divergence = false;
  for (auto& w : workers) {
    st.per_worker.push_back(w.stats());
    st.accepted += w.stats().accepted;
    st.soft_locked += w.stats().soft_locked;
    st.messages += w.stats().messages_sent;
    st.emitting_commits += w.stats().emitting_commits;
    if (!w.abort_reason().empty()) {
      any_abort = true;
      divergence |= w.divergence_abort();
      st.abort_reason = w.abort_reason();
    }
  }
  st.aborted = divergence;
  st.converged = !any_abort;
  st.objective = objective(x, out.z, dict, lambda, opts.conv);

  if (divergence && opts.throw_on_abort)
    throw DivergenceError(st.abort_reason);
  return out;
}

}  // namespace convdl::dist

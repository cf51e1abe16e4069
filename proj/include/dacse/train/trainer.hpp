#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "dacse/lm/adamw.hpp"
#include "dacse/lm/checkpoint.hpp"
#include "dacse/lm/model.hpp"
#include "dacse/sha256.hpp"
#include "dacse/train/build.hpp"
#include "dacse/train/plan.hpp"

namespace dacse {

// One dataset split held in memory as maskable rows. Desk-scale datasets are a
// few megabytes, so the step loop never touches disk.
struct LoadedSplit {
    std::vector<MaskedSequence> rows;
    std::vector<size_t> lens;

    static LoadedSplit load(const std::filesystem::path& path, const VocabLayout& layout) {
        LoadedSplit out;
        for (TrainingExample& ex : read_dataset(path.string())) {
            MaskedSequence m;
            m.loss_begin = ex.clean_begin(layout);
            m.task_label = ex.task_label;
            m.ids = std::move(ex.ids);
            out.lens.push_back(m.ids.size());
            out.rows.push_back(std::move(m));
        }
        return out;
    }
};

// Deterministic batch stream: per-epoch Fisher-Yates shuffle seeded by
// (seed, epoch), then greedy packing under the padded-token budget
// (rows x longest). The batch for step s is a pure function of (seed, lens, s),
// so resume replays the schedule instead of persisting loader state.
class BatchSchedule {
public:
    BatchSchedule(std::vector<size_t> lens, size_t batch_tokens, uint64_t seed)
        : lens_(std::move(lens)), batch_tokens_(batch_tokens), seed_(seed) {
        if (lens_.empty()) throw DataError("batch schedule over an empty split");
    }

    std::vector<size_t> next() {
        std::vector<size_t> batch;
        size_t max_len = 0;
        for (;;) {
            if (cursor_ == order_.size()) {
                if (!batch.empty()) break;  // batches do not straddle epochs
                start_epoch();
            }
            const size_t idx = order_[cursor_];
            const size_t padded = std::max(max_len, lens_[idx]) * (batch.size() + 1);
            if (!batch.empty() && padded > batch_tokens_) break;
            batch.push_back(idx);
            max_len = std::max(max_len, lens_[idx]);
            ++cursor_;
        }
        return batch;
    }

    void skip(uint64_t n_batches) {
        for (uint64_t i = 0; i < n_batches; ++i) next();
    }

private:
    void start_epoch() {
        order_.resize(lens_.size());
        std::iota(order_.begin(), order_.end(), size_t{0});
        Rng rng(derive_seed(seed_, 0xe70c0000ULL + epoch_));
        for (size_t i = order_.size(); i > 1; --i)
            std::swap(order_[i - 1], order_[rng.uniform_int(i)]);
        cursor_ = 0;
        ++epoch_;
    }

    std::vector<size_t> lens_;
    size_t batch_tokens_;
    uint64_t seed_;
    std::vector<size_t> order_;
    size_t cursor_ = 0;
    uint64_t epoch_ = 0;
};

namespace train_detail {

// Pad-to-longest materialization; pads sit past loss_end so they carry no loss.
inline std::vector<MaskedSequence> make_batch(const LoadedSplit& split,
                                              const std::vector<size_t>& idxs, uint32_t pad_id) {
    size_t max_len = 0;
    for (size_t i : idxs) max_len = std::max(max_len, split.rows[i].ids.size());
    std::vector<MaskedSequence> batch;
    batch.reserve(idxs.size());
    for (size_t i : idxs) {
        MaskedSequence m = split.rows[i];
        m.loss_end = m.ids.size();
        m.ids.resize(max_len, pad_id);
        batch.push_back(std::move(m));
    }
    return batch;
}

template <typename T>
LossStats eval_split(const Model<T>& model, const LoadedSplit& split, size_t batch_tokens,
                     uint32_t pad_id) {
    LossStats total;
    size_t i = 0;
    while (i < split.rows.size()) {
        std::vector<size_t> idxs;
        size_t max_len = 0;
        while (i < split.rows.size()) {
            const size_t padded = std::max(max_len, split.lens[i]) * (idxs.size() + 1);
            if (!idxs.empty() && padded > batch_tokens) break;
            max_len = std::max(max_len, split.lens[i]);
            idxs.push_back(i++);
        }
        total.add(model.loss(make_batch(split, idxs, pad_id)));
    }
    return total;
}

inline std::string sha256_file_hex(const std::filesystem::path& path) {
    const std::vector<unsigned char> bytes = io::read_file(path.string());
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return hex(h.finish());
}

}  // namespace train_detail

// Append-only JSONL telemetry; one row per (eval point, task) plus an "all"
// row whose token-weighted decomposition is exactly the per-task rows.
class TelemetryLog {
public:
    TelemetryLog(const std::filesystem::path& path, bool append)
        : out_(path, append ? std::ios::app : std::ios::trunc) {
        if (!out_) throw IoError("cannot open telemetry log: " + path.string());
    }

    void row(uint64_t step, const std::string& stage, const std::string& task, double loss,
             uint64_t tokens) {
        const nlohmann::json j{
            {"step", step}, {"stage", stage}, {"task", task}, {"loss", loss}, {"tokens", tokens}};
        out_ << j.dump() << '\n';
        out_.flush();
    }

    void eval_rows(uint64_t step, const std::string& stage, const LossStats& st) {
        row(step, stage, "all", st.mean(), st.total_count);
        for (int t = 0; t < kTaskCount; ++t)
            if (st.task_count[t]) row(step, stage, task_name(t), st.task_mean(t), st.task_count[t]);
    }

private:
    std::ofstream out_;
};

struct StageResult {
    std::filesystem::path checkpoint;
    uint64_t steps = 0;
    double initial_val_loss = 0.0;
    double final_val_loss = 0.0;
    std::array<double, kTaskCount> baseline_task_loss{};  // stage2: stage-1 per-task val loss
    std::array<double, kTaskCount> final_task_loss{};
};

struct TrainIo {
    std::filesystem::path out_dir;
    std::filesystem::path resume;     // empty = fresh run
    uint64_t max_session_steps = 0;   // 0 = run to the plan's end; >0 = checkpointed early stop
};

namespace train_detail {

// How an eval/checkpoint hook was reached. A handoff is a session cap mid-run:
// the checkpoint must be saved, but telemetry is only written if the step is an
// eval boundary, so an interrupted-then-resumed run leaves the same telemetry
// trail as an uninterrupted one.
enum class HookWhen { periodic, final, handoff };

// Shared inner loop: runs optimizer steps from step0 toward total, stopping
// early if session_steps caps the run, and handles divergence tracking. Hooks
// fire every eval_every steps plus once at the stopping point. A resumed
// session skips the eval at its own starting step: the interrupted session
// already logged it.
template <typename T, typename EvalFn>
uint64_t run_steps(Model<T>& model, AdamState<T>& opt, const AdamConfig& acfg, double clip_norm,
                   const LoadedSplit& train, BatchSchedule& sched, uint32_t pad_id,
                   uint64_t step0, uint64_t total, uint64_t session_steps, bool resumed,
                   uint64_t eval_every, EvalFn&& eval_hook) {
    const uint64_t stop = session_steps > 0 ? std::min(total, step0 + session_steps) : total;
    Weights<T> grad = Weights<T>::zeros(model.weights().cfg);
    double initial_loss = 0.0;
    int diverged_run = 0;
    for (uint64_t s = step0; s < stop; ++s) {
        if (s % eval_every == 0 && !(resumed && s == step0)) eval_hook(s, HookWhen::periodic);
        const std::vector<MaskedSequence> batch = make_batch(train, sched.next(), pad_id);
        const LossStats stats = model.loss_and_grad(batch, grad);
        const double loss = stats.mean();
        if (s == step0) initial_loss = loss;
        if (loss > 10.0 * initial_loss) {
            if (++diverged_run >= 100)
                throw DivergenceError("training loss stuck above 10x initial (" +
                                      std::to_string(loss) + " vs " +
                                      std::to_string(initial_loss) + ") for 100 steps");
        } else {
            diverged_run = 0;
        }
        clip_gradients(grad, clip_norm);
        adamw_step(model.weights(), grad, opt, acfg);
    }
    eval_hook(stop, stop == total ? HookWhen::final : HookWhen::handoff);
    return stop;
}

}  // namespace train_detail

// Stage 1: multi-task training on the mixed dataset. steps_per_task is the
// total step budget. Resume replays the batch schedule up to the checkpoint's
// step and continues bit-exactly in single-threaded mode.
inline StageResult train_stage1(const DatasetCatalog& catalog, const ModelConfig& model_cfg,
                                const TrainPlan& plan, const TrainIo& io) {
    plan.validate();
    if (plan.stage != "stage1") throw ConfigError("train_stage1 called with a stage2 plan");
    VocabLayout layout;
    layout.L = catalog.L;
    layout.K = catalog.K;
    layout.validate();
    if (model_cfg.vocab_size != static_cast<int>(layout.vocab_size()))
        throw ConfigError("model vocab " + std::to_string(model_cfg.vocab_size) +
                          " != dataset vocab " + std::to_string(layout.vocab_size()));

    const LoadedSplit train = LoadedSplit::load(catalog.resolve(catalog.stage1_train), layout);
    if (train.rows.empty()) throw DataError("stage1 train split is empty");
    const LoadedSplit val_loaded = LoadedSplit::load(catalog.resolve(catalog.stage1_val), layout);
    const LoadedSplit& val = val_loaded.rows.empty() ? train : val_loaded;
    const uint32_t pad_id = layout.pad();

    const uint64_t total = static_cast<uint64_t>(plan.steps_per_task);
    uint64_t step0 = 0;
    Weights<float> w;
    AdamState<float> opt;
    CheckpointMeta meta;
    meta.model = model_cfg;
    meta.L = layout.L;
    meta.K = layout.K;
    meta.codec_fingerprint_hex = catalog.codec_fingerprint_hex;
    meta.stage = "stage1";

    if (io.resume.empty()) {
        w = Weights<float>::init(model_cfg, derive_seed(plan.seed, 0x6d6f6465ULL));
        opt = AdamState<float>::init(model_cfg);
    } else {
        LoadedCheckpoint<float> ck = load_checkpoint<float>(io.resume.string());
        if (!ck.has_optimizer)
            throw ConfigError("cannot resume: checkpoint has no optimizer state");
        if (ck.meta.stage != "stage1") throw ConfigError("resume checkpoint is not a stage1 run");
        if (ck.meta.codec_fingerprint_hex != catalog.codec_fingerprint_hex)
            throw ConfigError("resume checkpoint was tokenized with a different codec");
        w = std::move(ck.weights);
        opt = std::move(ck.opt);
        step0 = ck.meta.step;
        if (step0 > total) throw ConfigError("resume step is past the plan's step budget");
    }

    AdamConfig acfg;
    acfg.lr = plan.lr;
    acfg.weight_decay = plan.weight_decay;
    acfg.warmup_steps = static_cast<uint64_t>(plan.warmup_steps);
    acfg.total_steps = total;

    Model<float> model(std::move(w));
    BatchSchedule sched(train.lens, plan.batch_tokens, derive_seed(plan.seed, 0xba7c4ULL));
    sched.skip(step0);

    std::filesystem::create_directories(io.out_dir);
    TelemetryLog tel(io.out_dir / "telemetry.stage1.jsonl", !io.resume.empty());
    const std::filesystem::path ckpt_path = io.out_dir / "stage1.ckpt";

    StageResult result;
    result.checkpoint = ckpt_path;
    bool first_eval = true;
    const auto eval_hook = [&](uint64_t s, train_detail::HookWhen when) {
        const bool want_eval = when != train_detail::HookWhen::handoff ||
                               s % static_cast<uint64_t>(plan.eval_every) == 0;
        if (want_eval) {
            const LossStats st = train_detail::eval_split(model, val, plan.batch_tokens, pad_id);
            tel.eval_rows(s, "stage1", st);
            if (first_eval) {
                result.initial_val_loss = st.mean();
                first_eval = false;
            }
            if (when == train_detail::HookWhen::final) {
                result.final_val_loss = st.mean();
                for (int t = 0; t < kTaskCount; ++t) result.final_task_loss[t] = st.task_mean(t);
            }
        }
        meta.step = s;
        opt.step = s;
        save_checkpoint(ckpt_path.string(), model.weights(), meta, &opt);
    };
    result.steps = train_detail::run_steps(model, opt, acfg, plan.clip_norm, train, sched, pad_id,
                                           step0, total, io.max_session_steps,
                                           !io.resume.empty(),
                                           static_cast<uint64_t>(plan.eval_every), eval_hook);
    return result;
}

// Stage 2: sequential per-task fine-tuning starting from a stage-1 checkpoint.
// Each task gets steps_per_task steps with a fresh optimizer and schedule; the
// produced checkpoint records the stage-1 file hash as its parent.
inline StageResult train_stage2(const std::filesystem::path& stage1_ckpt,
                                const DatasetCatalog& catalog, const TrainPlan& plan,
                                const TrainIo& io) {
    plan.validate();
    if (plan.stage != "stage2") throw ConfigError("train_stage2 called with a stage1 plan");
    VocabLayout layout;
    layout.L = catalog.L;
    layout.K = catalog.K;
    layout.validate();
    const uint32_t pad_id = layout.pad();

    LoadedCheckpoint<float> s1 = load_checkpoint<float>(stage1_ckpt.string());
    if (s1.meta.stage != "stage1")
        throw ConfigError("stage2 must start from a stage1 checkpoint, got " + s1.meta.stage);
    if (s1.meta.codec_fingerprint_hex != catalog.codec_fingerprint_hex)
        throw ConfigError("stage1 checkpoint was tokenized with a different codec");
    if (s1.meta.model.vocab_size != static_cast<int>(layout.vocab_size()))
        throw ConfigError("stage1 checkpoint vocab does not match the catalog");
    const std::string parent_hex = train_detail::sha256_file_hex(stage1_ckpt);

    // task_order must cover every label with stage-2 data.
    for (int k = 0; k < 5; ++k) {
        DatasetReader probe(catalog.resolve(catalog.stage2_train[k]).string());
        const bool in_order = std::find(plan.task_order.begin(), plan.task_order.end(),
                                        static_cast<DistortionKind>(k)) != plan.task_order.end();
        if (probe.header().n_records > 0 && !in_order)
            throw ConfigError(std::string("task_order misses task with data: ") +
                              kind_name(static_cast<DistortionKind>(k)));
    }

    struct TaskData {
        DistortionKind kind;
        LoadedSplit train, val_loaded;
        const LoadedSplit* val = nullptr;
    };
    std::vector<TaskData> tasks;
    for (DistortionKind kind : plan.task_order) {
        TaskData td;
        td.kind = kind;
        const int k = static_cast<int>(kind);
        td.train = LoadedSplit::load(catalog.resolve(catalog.stage2_train[k]), layout);
        if (td.train.rows.empty())
            throw DataError(std::string("stage2 train split empty for ") + kind_name(kind));
        td.val_loaded = LoadedSplit::load(catalog.resolve(catalog.stage2_val[k]), layout);
        tasks.push_back(std::move(td));
    }
    for (TaskData& td : tasks) td.val = td.val_loaded.rows.empty() ? &td.train : &td.val_loaded;

    std::filesystem::create_directories(io.out_dir);
    TelemetryLog tel(io.out_dir / "telemetry.stage2.jsonl", !io.resume.empty());
    const std::filesystem::path ckpt_path = io.out_dir / "stage2.ckpt";
    const uint64_t spt = static_cast<uint64_t>(plan.steps_per_task);
    const uint64_t total = spt * tasks.size();

    StageResult result;
    result.checkpoint = ckpt_path;
    result.steps = total;

    // Per-task baselines measured on the untouched stage-1 weights. A resumed
    // session recomputes them for the result struct (deterministic, so they
    // match the interrupted session's) but does not log them again.
    {
        Model<float> probe(std::move(s1.weights));
        for (const TaskData& td : tasks) {
            const LossStats st =
                train_detail::eval_split(probe, *td.val, plan.batch_tokens, pad_id);
            result.baseline_task_loss[static_cast<int>(td.kind)] = st.mean();
            if (io.resume.empty()) tel.eval_rows(s1.meta.step, "stage1", st);
        }
        s1.weights = std::move(probe.weights());
    }

    CheckpointMeta meta;
    meta.model = s1.meta.model;
    meta.L = layout.L;
    meta.K = layout.K;
    meta.codec_fingerprint_hex = catalog.codec_fingerprint_hex;
    meta.stage = "stage2";
    meta.parent_hex = parent_hex;

    uint64_t step0 = 0;
    Weights<float> w;
    AdamState<float> opt;
    bool opt_from_resume = false;
    if (io.resume.empty()) {
        w = std::move(s1.weights);
    } else {
        LoadedCheckpoint<float> ck = load_checkpoint<float>(io.resume.string());
        if (!ck.has_optimizer)
            throw ConfigError("cannot resume: checkpoint has no optimizer state");
        if (ck.meta.stage != "stage2") throw ConfigError("resume checkpoint is not a stage2 run");
        if (ck.meta.parent_hex != parent_hex)
            throw ConfigError("resume checkpoint descends from a different stage1 checkpoint");
        w = std::move(ck.weights);
        opt = std::move(ck.opt);
        step0 = ck.meta.step;
        opt_from_resume = true;
        if (step0 > total) throw ConfigError("resume step is past the plan's step budget");
    }

    AdamConfig acfg;
    acfg.lr = plan.lr;
    acfg.weight_decay = plan.weight_decay;
    acfg.warmup_steps = static_cast<uint64_t>(plan.warmup_steps);
    acfg.total_steps = spt;

    Model<float> model(std::move(w));
    const auto save = [&](uint64_t global_step) {
        meta.step = global_step;
        save_checkpoint(ckpt_path.string(), model.weights(), meta, &opt);
    };

    uint64_t session_left = io.max_session_steps;  // 0 = unlimited
    uint64_t reached_global = step0;
    bool capped = false;
    for (size_t ti = 0; ti < tasks.size() && !capped; ++ti) {
        const TaskData& td = tasks[ti];
        const uint64_t task_begin = ti * spt, task_end = (ti + 1) * spt;
        if (step0 >= task_end) continue;  // resumed past this task
        if (io.max_session_steps > 0 && session_left == 0) {
            capped = true;
            break;
        }

        const uint64_t local0 = step0 > task_begin ? step0 - task_begin : 0;
        const bool resumed_here = opt_from_resume;
        if (!opt_from_resume || local0 == 0) opt = AdamState<float>::init(meta.model);
        opt.step = local0;
        opt_from_resume = false;

        BatchSchedule sched(
            td.train.lens, plan.batch_tokens,
            derive_seed(plan.seed, 0x52000ULL + static_cast<uint64_t>(td.kind)));
        sched.skip(local0);

        // Task-final evals are handled by the combined sweep below so each
        // step has exactly one telemetry group; handoffs log only on an eval
        // boundary, mirroring run_steps' contract.
        const auto eval_hook = [&](uint64_t local, train_detail::HookWhen when) {
            const uint64_t global = task_begin + local;
            const bool want_eval =
                when == train_detail::HookWhen::periodic ||
                (when == train_detail::HookWhen::handoff &&
                 local % static_cast<uint64_t>(plan.eval_every) == 0);
            if (want_eval) {
                const LossStats st =
                    train_detail::eval_split(model, *td.val, plan.batch_tokens, pad_id);
                tel.eval_rows(global, "stage2", st);
            }
            save(global);
        };
        const uint64_t reached = train_detail::run_steps(
            model, opt, acfg, plan.clip_norm, td.train, sched, pad_id, local0, spt, session_left,
            resumed_here, static_cast<uint64_t>(plan.eval_every), eval_hook);
        reached_global = task_begin + reached;
        if (io.max_session_steps > 0) session_left -= reached - local0;
        if (reached < spt) capped = true;
    }

    if (capped) {
        result.steps = reached_global;
        return result;
    }

    // Final sweep over every task with the finished weights; one combined
    // telemetry group so the per-task rows decompose the "all" row.
    LossStats combined;
    for (const TaskData& td : tasks) {
        const LossStats st = train_detail::eval_split(model, *td.val, plan.batch_tokens, pad_id);
        result.final_task_loss[static_cast<int>(td.kind)] = st.mean();
        combined.add(st);
    }
    tel.eval_rows(total, "stage2", combined);
    result.final_val_loss = combined.mean();
    save(total);
    return result;
}

// Teacher-forced argmax accuracy over the masked targets; the memorization
// diagnostic for overfit runs.
template <typename T>
double teacher_forced_accuracy(const Model<T>& model, const LoadedSplit& split) {
    if (split.rows.empty()) throw DataError("accuracy over an empty split");
    size_t hits = 0, count = 0;
    for (const MaskedSequence& seq : split.rows) {
        const std::vector<T> logits = model.forward(seq.ids);
        const size_t V = model.weights().cfg.vocab_size;
        const size_t end = std::min(seq.loss_end, seq.ids.size());
        for (size_t tgt = seq.loss_begin; tgt < end; ++tgt) {
            const T* row = logits.data() + (tgt - 1) * V;
            size_t arg = 0;
            for (size_t v = 1; v < V; ++v)
                if (row[v] > row[arg]) arg = v;
            hits += arg == seq.ids[tgt];
            ++count;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(count);
}

}  // namespace dacse

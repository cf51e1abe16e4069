// dacse: every pipeline stage as a subcommand. Exit codes: 0 success, 1 domain
// error, 2 usage error. All randomness flows from --seed; outputs are written
// atomically, so a failing run never leaves partial artifacts.

#include <cinttypes>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dacse/dacse.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kVersionLine =
    "dacse 0.1.0 (formats: dataset DSE1 v1, checkpoint DSE1CKPT v1, codec RVQ1 v1)";

// Every run logs its fully-resolved configuration on stderr; stdout stays
// reserved for machine-readable reports.
void log_config(const std::string& sub, const json& cfg) {
    std::fprintf(stderr, "dacse %s config %s\n", sub.c_str(), cfg.dump().c_str());
}

std::vector<fs::path> sorted_wavs(const fs::path& dir) {
    std::vector<fs::path> files;
    if (!fs::is_directory(dir)) throw dacse::IoError("not a directory: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".wav") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw dacse::DataError("no .wav files in " + dir.string());
    return files;
}

// Canonical ingest: resample to the codec rate and cap the duration.
dacse::Waveform load_clip(const fs::path& path, int rate_hz) {
    dacse::Waveform w = dacse::read_wav(path);
    if (w.sample_rate_hz != rate_hz) w = dacse::resample(w, rate_hz);
    w.truncate_to_seconds(dacse::kMaxClipSeconds);
    return w;
}

// Runs fn(i) for i in [0, n) across the configured workers, collecting the
// first exception; per-index outputs keep results deterministic.
template <typename Fn>
void for_each_indexed(size_t n, Fn&& fn) {
    std::vector<std::exception_ptr> errs(n);
    dacse::parallel_for(n, [&](size_t lo, size_t hi) {
        for (size_t i = lo; i < hi; ++i) {
            try {
                fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    });
    for (const auto& e : errs)
        if (e) std::rethrow_exception(e);
}

dacse::CodecConfig profile_codec(const std::string& profile) {
    if (profile == "paper") return dacse::CodecConfig::paper();
    if (profile == "desk") return dacse::CodecConfig::desk();
    throw dacse::ConfigError("unknown profile: " + profile);
}

// --- degrade -----------------------------------------------------------------

struct DegradeOpts {
    std::string clean_dir, assets, out;
    uint64_t seed = 1;
    int jobs = 1;
};

void run_degrade(const DegradeOpts& o) {
    dacse::set_jobs(o.jobs);
    log_config("degrade", {{"clean_dir", o.clean_dir},
                           {"assets", o.assets},
                           {"out", o.out},
                           {"seed", o.seed},
                           {"jobs", o.jobs}});
    const dacse::AssetCatalog assets = dacse::AssetCatalog::load(o.assets);
    const auto files = sorted_wavs(o.clean_dir);
    fs::create_directories(o.out);

    const dacse::DistortionTable table;
    std::vector<json> rows(files.size());
    for_each_indexed(files.size(), [&](size_t i) {
        const dacse::Waveform clean = load_clip(files[i], dacse::kCanonicalSampleRate);
        const dacse::DistortionChain chain =
            dacse::sample_chain(dacse::derive_seed(o.seed, i), assets, table);
        const auto [noisy, aligned] = dacse::apply_chain(clean, chain, assets);
        const fs::path noisy_path = fs::path(o.out) / files[i].filename();
        dacse::write_wav(noisy, noisy_path);
        rows[i] = json{{"clean", files[i].string()},
                       {"noisy", noisy_path.string()},
                       {"chain", chain.to_json()},
                       {"seed", chain.seed}};
    });

    const fs::path manifest = fs::path(o.out) / "degraded.jsonl";
    dacse::io::AtomicFile mf(manifest);
    for (const json& row : rows) mf.stream() << row.dump() << "\n";
    mf.commit();
    std::cout << json{{"clips", files.size()}, {"manifest", manifest.string()}}.dump() << "\n";
}

// --- codec-train ---------------------------------------------------------------

struct CodecTrainOpts {
    std::string clean_dir, out;
    std::string profile = "desk";
    int iters = dacse::kRvqDefaultIters;
    uint64_t seed = dacse::kRvqDefaultSeed;
    int jobs = 1;
};

void run_codec_train(const CodecTrainOpts& o) {
    dacse::set_jobs(o.jobs);
    log_config("codec-train", {{"clean_dir", o.clean_dir},
                               {"out", o.out},
                               {"profile", o.profile},
                               {"iters", o.iters},
                               {"seed", o.seed},
                               {"jobs", o.jobs}});
    const dacse::CodecConfig ccfg = profile_codec(o.profile);
    const dacse::FrameTransform transform(ccfg);
    const auto files = sorted_wavs(o.clean_dir);

    std::vector<dacse::FrameMatrix> per_clip(files.size());
    for_each_indexed(files.size(), [&](size_t i) {
        per_clip[i] = transform.analyze(load_clip(files[i], ccfg.sample_rate_hz));
    });
    dacse::FrameMatrix all;
    all.dim = ccfg.latent_dim;
    for (const auto& fm : per_clip) {
        all.data.insert(all.data.end(), fm.data.begin(), fm.data.end());
        all.n_frames += fm.n_frames;
    }

    const dacse::RvqCodebooks books = dacse::train_rvq(all, ccfg, o.iters, o.seed);
    dacse::save_codebooks(o.out, books);
    std::cout << json{{"frames", all.n_frames},
                      {"L", books.n_codebooks},
                      {"K", books.codebook_size},
                      {"latent_dim", books.latent_dim},
                      {"fingerprint", dacse::hex(books.fingerprint)},
                      {"residual_mse", books.train_residual_mse},
                      {"codec", o.out}}
                     .dump()
              << "\n";
}

// --- tokenize -------------------------------------------------------------------

struct TokenizeOpts {
    std::string in, codec, out;
    int jobs = 1;
};

// Raw flattened streams (no specials), one record per clip, task label 255.
constexpr uint8_t kRawStreamLabel = 255;

void run_tokenize(const TokenizeOpts& o) {
    dacse::set_jobs(o.jobs);
    log_config("tokenize",
               {{"in", o.in}, {"codec", o.codec}, {"out", o.out}, {"jobs", o.jobs}});
    const dacse::RvqCodebooks books = dacse::load_codebooks(o.codec);
    const dacse::CodecConfig ccfg = dacse::config_from_books(books);
    const dacse::FrameTransform transform(ccfg);
    const dacse::VocabLayout layout{books.n_codebooks, books.codebook_size};

    std::vector<fs::path> files;
    if (fs::is_directory(o.in))
        files = sorted_wavs(o.in);
    else
        files.push_back(o.in);

    std::vector<dacse::TrainingExample> records(files.size());
    for_each_indexed(files.size(), [&](size_t i) {
        const dacse::Waveform w = load_clip(files[i], ccfg.sample_rate_hz);
        const dacse::TokenGrid grid = dacse::rvq_encode(transform.analyze(w), books);
        records[i].ids = dacse::flatten(grid, layout).ids;
        records[i].task_label = kRawStreamLabel;
        records[i].seed = 0;
    });

    dacse::DatasetWriter writer(o.out, layout, ccfg.frame_rate_hz());
    size_t total = 0;
    for (const auto& r : records) {
        writer.append(r);
        total += r.ids.size();
    }
    writer.commit();
    std::cout << json{{"clips", files.size()}, {"tokens", total}, {"out", o.out}}.dump() << "\n";
}

// --- dataset-build ---------------------------------------------------------------

struct DatasetBuildOpts {
    std::string clean_dir, assets, codec, out;
    std::string profile = "desk";
    uint64_t seed = 1;
    int jobs = 1;
};

void run_dataset_build(const DatasetBuildOpts& o) {
    dacse::set_jobs(o.jobs);
    log_config("dataset-build", {{"clean_dir", o.clean_dir},
                                 {"assets", o.assets},
                                 {"codec", o.codec},
                                 {"out", o.out},
                                 {"profile", o.profile},
                                 {"seed", o.seed},
                                 {"jobs", o.jobs}});
    const dacse::AssetCatalog assets = dacse::AssetCatalog::load(o.assets);
    const dacse::RvqCodebooks books = dacse::load_codebooks(o.codec);
    const dacse::CodecConfig ccfg = dacse::config_from_books(books);
    const dacse::VocabLayout layout{books.n_codebooks, books.codebook_size};

    dacse::BuildConfig bcfg;
    bcfg.context_limit = o.profile == "paper" ? 8192 : 2048;
    const dacse::DatasetCatalog cat =
        dacse::build_datasets(o.clean_dir, assets, books, ccfg, layout, o.out, o.seed, bcfg);
    std::cout << json{{"scanned", cat.clips_scanned},
                      {"duplicates", cat.duplicates},
                      {"skipped_short", cat.skipped_short},
                      {"skipped_overflow", cat.skipped_overflow},
                      {"train_records", cat.train_records},
                      {"val_records", cat.val_records},
                      {"catalog", (fs::path(o.out) / "catalog.json").string()}}
                     .dump()
              << "\n";
}

// --- train ------------------------------------------------------------------------

struct TrainOpts {
    std::string plan, data, out;
    std::string resume, stage1;
    std::string profile = "desk";
    uint64_t max_steps = 0;
    int64_t seed = -1;  // <0 = take the plan's seed
};

void run_train(const TrainOpts& o) {
    dacse::TrainPlan plan = dacse::TrainPlan::parse_file(o.plan);
    if (o.seed >= 0) plan.seed = static_cast<uint64_t>(o.seed);
    log_config("train", {{"plan", o.plan},
                         {"data", o.data},
                         {"out", o.out},
                         {"resume", o.resume},
                         {"stage1", o.stage1},
                         {"profile", o.profile},
                         {"max_steps", o.max_steps},
                         {"stage", plan.stage},
                         {"seed", plan.seed}});

    fs::path catalog_path = o.data;
    if (fs::is_directory(catalog_path)) catalog_path /= "catalog.json";
    const dacse::DatasetCatalog cat = dacse::DatasetCatalog::load(catalog_path);
    const dacse::VocabLayout layout{cat.L, cat.K};
    const int vocab = static_cast<int>(layout.vocab_size());
    const dacse::ModelConfig mcfg = o.profile == "paper" ? dacse::ModelConfig::paper(vocab)
                                                         : dacse::ModelConfig::desk(vocab);

    dacse::TrainIo tio{o.out, o.resume, o.max_steps};
    dacse::StageResult res;
    if (plan.stage == "stage1") {
        res = dacse::train_stage1(cat, mcfg, plan, tio);
    } else {
        if (o.stage1.empty())
            throw dacse::ConfigError("stage2 plans need --stage1 <checkpoint>");
        res = dacse::train_stage2(o.stage1, cat, plan, tio);
    }

    json tasks = json::object();
    for (int t = 0; t < dacse::kTaskCount; ++t) {
        if (res.final_task_loss[t] == 0.0 && res.baseline_task_loss[t] == 0.0) continue;
        if (plan.stage == "stage2")
            tasks[dacse::task_name(static_cast<uint8_t>(t))] = {
                {"baseline", res.baseline_task_loss[t]}, {"final", res.final_task_loss[t]}};
        else
            tasks[dacse::task_name(static_cast<uint8_t>(t))] = res.final_task_loss[t];
    }
    std::cout << json{{"stage", plan.stage},
                      {"checkpoint", res.checkpoint.string()},
                      {"steps", res.steps},
                      {"initial_val_loss", res.initial_val_loss},
                      {"final_val_loss", res.final_val_loss},
                      {"tasks", tasks}}
                     .dump()
              << "\n";
}

// --- enhance -------------------------------------------------------------------------

struct EnhanceCliOpts {
    std::string in, out, ckpt, codec;
    double temp = 0.0;
    int top_k = 0;
    double chunk_s = 0.0;
    uint64_t seed = 0;
};

void run_enhance(const EnhanceCliOpts& o) {
    log_config("enhance", {{"in", o.in},
                           {"out", o.out},
                           {"ckpt", o.ckpt},
                           {"codec", o.codec},
                           {"temp", o.temp},
                           {"top_k", o.top_k},
                           {"chunk_s", o.chunk_s},
                           {"seed", o.seed}});
    const dacse::Enhancer enh = dacse::Enhancer::load(o.ckpt, o.codec);
    const dacse::Waveform in = dacse::read_wav(o.in);
    dacse::EnhanceOptions eo;
    eo.policy.temperature = o.temp;
    eo.policy.top_k = o.top_k;
    eo.policy.seed = o.seed;
    if (o.chunk_s > 0.0) eo.chunk_s = o.chunk_s;
    const auto [out, report] = enh.run(in, eo);
    dacse::write_wav(out, o.out);
    std::cout << report.to_json().dump() << "\n";
}

// --- eval ------------------------------------------------------------------------------

struct EvalOpts {
    std::string ref_dir, est_dir, out;
    std::string png_dir;
    int jobs = 1;
};

json metric_row(const dacse::MetricValues& m) {
    json j{{"name", m.name},
           {"si_snr_db", m.si_snr_db},
           {"lsd_db", m.lsd_db},
           {"mel_dist", m.mel_dist}};
    if (m.token_acc) j["token_accuracy"] = *m.token_acc;
    return j;
}

void run_eval(const EvalOpts& o) {
    dacse::set_jobs(o.jobs);
    log_config("eval", {{"ref_dir", o.ref_dir},
                        {"est_dir", o.est_dir},
                        {"out", o.out},
                        {"png_dir", o.png_dir},
                        {"jobs", o.jobs}});
    const auto est_files = sorted_wavs(o.est_dir);
    if (!o.png_dir.empty()) fs::create_directories(o.png_dir);

    std::vector<dacse::MetricValues> per_file(est_files.size());
    for_each_indexed(est_files.size(), [&](size_t i) {
        const fs::path& est_path = est_files[i];
        const fs::path ref_path = fs::path(o.ref_dir) / est_path.filename();
        if (!fs::exists(ref_path))
            throw dacse::DataError("no reference for " + est_path.filename().string());
        const dacse::Waveform est = dacse::read_wav(est_path);
        const dacse::Waveform ref = dacse::read_wav(ref_path);
        if (est.sample_rate_hz != ref.sample_rate_hz)
            throw dacse::RateMismatchError(est_path.filename().string() +
                                           ": estimate and reference sample rates differ");
        dacse::MetricValues m;
        m.name = est_path.stem().string();
        m.si_snr_db = dacse::si_snr(est, ref);
        m.lsd_db = dacse::log_spectral_distance(est, ref);
        m.mel_dist = dacse::mel_distance(est, ref);

        // Token accuracy only when both sides carry a token sidecar.
        const fs::path est_tok = fs::path(o.est_dir) / (m.name + ".tokens");
        const fs::path ref_tok = fs::path(o.ref_dir) / (m.name + ".tokens");
        if (fs::exists(est_tok) && fs::exists(ref_tok)) {
            const auto a = dacse::read_dataset(est_tok.string());
            const auto b = dacse::read_dataset(ref_tok.string());
            if (a.size() == 1 && b.size() == 1)
                m.token_acc = dacse::token_accuracy(a[0].ids, b[0].ids);
        }

        if (!o.png_dir.empty()) {
            dacse::emit_spectrogram_png(est, fs::path(o.png_dir) / (m.name + ".png"));
            dacse::emit_spectrogram_png(ref, fs::path(o.png_dir) / (m.name + ".ref.png"));
        }
        per_file[i] = std::move(m);
    });

    const dacse::MetricValues agg = dacse::aggregate_metrics(per_file);
    json files = json::array();
    for (const auto& m : per_file) files.push_back(metric_row(m));
    const json report{{"files", files}, {"aggregate", metric_row(agg)}};

    if (!o.out.empty()) {
        dacse::io::AtomicFile rf(o.out);
        rf.stream() << report.dump(2) << "\n";
        rf.commit();
    }
    std::cout << json{{"aggregate", metric_row(agg)}, {"files", per_file.size()}}.dump() << "\n";
}

// --- inspect -------------------------------------------------------------------------

void inspect_checkpoint(std::ifstream& in, const std::string& path) {
    const uint32_t version = dacse::io::read_le<uint32_t>(in, "version");
    const uint32_t json_len = dacse::io::read_le<uint32_t>(in, "json length");
    std::string meta_text(json_len, '\0');
    dacse::io::read_bytes(in, meta_text.data(), json_len, "meta json");
    const json meta = json::parse(meta_text);

    uint64_t params = 0;
    const auto walk = [&](uint32_t n) {
        uint64_t count = 0;
        for (uint32_t t = 0; t < n; ++t) {
            const uint16_t name_len = dacse::io::read_le<uint16_t>(in, "tensor name length");
            in.seekg(name_len, std::ios::cur);
            dacse::io::read_le<uint8_t>(in, "tensor dtype");
            const uint8_t rank = dacse::io::read_le<uint8_t>(in, "tensor rank");
            uint64_t numel = 1;
            for (uint8_t r = 0; r < rank; ++r)
                numel *= dacse::io::read_le<uint64_t>(in, "tensor dim");
            in.seekg(static_cast<std::streamoff>(numel * 4), std::ios::cur);
            count += numel;
        }
        return count;
    };
    const uint32_t n_model = dacse::io::read_le<uint32_t>(in, "model tensor count");
    params = walk(n_model);
    const uint32_t n_opt = dacse::io::read_le<uint32_t>(in, "optimizer tensor count");
    walk(n_opt);
    const uint64_t opt_step = dacse::io::read_le<uint64_t>(in, "optimizer step");

    std::printf("kind: checkpoint (DSE1CKPT v%u)\n", version);
    std::printf("file: %s (%" PRIuMAX " bytes)\n", path.c_str(),
                static_cast<uintmax_t>(fs::file_size(path)));
    const json& m = meta.at("model");
    std::printf("stage: %s  step: %" PRIu64 "\n", meta.value("stage", "?").c_str(),
                meta.value("step", uint64_t{0}));
    std::printf("model: profile=%s d_model=%d layers=%d heads=%d d_ff=%d context=%d vocab=%d\n",
                m.value("profile", "?").c_str(), m.value("d_model", 0), m.value("n_layers", 0),
                m.value("n_heads", 0), m.value("d_ff", 0), m.value("context_len", 0),
                m.value("vocab_size", 0));
    std::printf("vocab: L=%d K=%d\n", meta.at("vocab").value("L", 0),
                meta.at("vocab").value("K", 0));
    std::printf("codec_fingerprint: %s\n", meta.value("codec_fingerprint", "").c_str());
    if (!meta.value("parent", std::string{}).empty())
        std::printf("parent: %s\n", meta.value("parent", "").c_str());
    std::printf("parameters: %" PRIu64 "\n", params);
    std::printf("optimizer: %s (step %" PRIu64 ")\n", n_opt > 0 ? "present" : "absent", opt_step);
}

void inspect_dataset(const std::string& path) {
    dacse::DatasetReader reader(path);
    const dacse::DatasetHeader& h = reader.header();
    uint64_t tokens = 0;
    std::array<uint64_t, 256> by_label{};
    dacse::TrainingExample ex;
    while (reader.next(ex)) {
        tokens += ex.ids.size();
        ++by_label[ex.task_label];
    }
    std::printf("kind: token dataset (DSE1 v%u)\n", dacse::kDatasetVersion);
    std::printf("vocab: L=%u K=%u vocab_size=%u\n", h.L, h.K, h.vocab_size);
    std::printf("frame_rate_mhz: %u\n", h.frame_rate_mhz);
    std::printf("records: %" PRIu64 "  tokens: %" PRIu64 "\n", h.n_records, tokens);
    for (int t = 0; t < 256; ++t) {
        if (by_label[t] == 0) continue;
        const char* name = t < 5 ? dacse::kind_name(static_cast<dacse::DistortionKind>(t))
                           : t == dacse::kTaskMixed ? "mixed"
                           : t == kRawStreamLabel   ? "raw"
                                                    : "unknown";
        std::printf("label %d (%s): %" PRIu64 " records\n", t, name, by_label[t]);
    }
}

void inspect_codebooks(const std::string& path) {
    const dacse::RvqCodebooks cb = dacse::load_codebooks(path);
    std::printf("kind: RVQ codebooks (RVQ1 v%u)\n", dacse::kRvqFileVersion);
    std::printf("L=%d K=%d latent_dim=%d\n", cb.n_codebooks, cb.codebook_size, cb.latent_dim);
    std::printf("fingerprint: %s\n", dacse::hex(cb.fingerprint).c_str());
    const dacse::CodecConfig cfg = dacse::config_from_books(cb);
    std::printf("frame: %d samples, hop %d, %.7f Hz frame rate\n", cfg.frame_len, cfg.hop,
                cfg.frame_rate_hz());
}

void inspect_wav(const std::string& path) {
    const dacse::Waveform w = dacse::read_wav(path);
    std::printf("kind: WAV audio\n");
    std::printf("sample_rate_hz: %d\n", w.sample_rate_hz);
    std::printf("samples: %zu (%.3f s)\n", w.samples.size(),
                static_cast<double>(w.samples.size()) / w.sample_rate_hz);
    std::printf("peak: %.6f  rms: %.6f\n", w.peak(), w.rms());
}

void inspect_plan(const std::string& path) {
    const dacse::TrainPlan plan = dacse::TrainPlan::parse_file(path);
    std::printf("kind: train plan\n");
    std::printf("stage: %s\n", plan.stage.c_str());
    std::printf("steps_per_task: %d  batch_tokens: %d  eval_every: %d\n", plan.steps_per_task,
                plan.batch_tokens, plan.eval_every);
    std::printf("lr: %g  warmup: %d  weight_decay: %g  clip: %g  seed: %" PRIu64 "\n", plan.lr,
                plan.warmup_steps, plan.weight_decay, plan.clip_norm, plan.seed);
    if (!plan.task_order.empty()) {
        std::string order;
        for (const auto k : plan.task_order) {
            if (!order.empty()) order += ",";
            order += dacse::kind_name(k);
        }
        std::printf("task_order: %s\n", order.c_str());
    }
}

void inspect_json_like(const std::string& path) {
    const auto bytes = dacse::io::read_file(path);
    const std::string text(bytes.begin(), bytes.end());

    // Whole-file JSON object: the dataset catalog, or some config blob.
    json j = json::parse(text, nullptr, false);
    if (!j.is_discarded() && j.is_object()) {
        if (j.contains("stage1") && j.contains("codec_fingerprint")) {
            const dacse::DatasetCatalog cat = dacse::DatasetCatalog::load(path);
            std::printf("kind: dataset catalog\n");
            std::printf("codec_fingerprint: %s\n", cat.codec_fingerprint_hex.c_str());
            std::printf("vocab: L=%d K=%d  frame_rate_hz: %.7f\n", cat.L, cat.K,
                        cat.frame_rate_hz);
            std::printf("clips: scanned=%" PRIu64 " duplicates=%" PRIu64 " short=%" PRIu64
                        " overflow=%" PRIu64 "\n",
                        cat.clips_scanned, cat.duplicates, cat.skipped_short,
                        cat.skipped_overflow);
            std::printf("records: train=%" PRIu64 " val=%" PRIu64 "\n", cat.train_records,
                        cat.val_records);
        } else {
            std::printf("kind: json\n%s\n", j.dump(2).c_str());
        }
        return;
    }

    // JSON-lines manifests: asset catalogs, degrade provenance, telemetry.
    size_t rows = 0, noise = 0, rir = 0, chains = 0, telemetry = 0;
    std::istringstream in(text);
    std::string line;
    bool jsonl = true;
    while (jsonl && std::getline(in, line)) {
        if (line.empty()) continue;
        const json row = json::parse(line, nullptr, false);
        if (row.is_discarded()) {
            jsonl = false;
            break;
        }
        ++rows;
        if (row.value("kind", "") == "noise") ++noise;
        if (row.value("kind", "") == "rir") ++rir;
        if (row.contains("chain")) ++chains;
        if (row.contains("loss")) ++telemetry;
    }
    if (!jsonl || rows == 0) {
        inspect_plan(path);
    } else if (noise + rir == rows) {
        std::printf("kind: asset manifest\nnoise: %zu\nrir: %zu\n", noise, rir);
    } else if (chains == rows) {
        std::printf("kind: degrade provenance\nclips: %zu\n", rows);
    } else if (telemetry == rows) {
        std::printf("kind: telemetry log\nrows: %zu\n", rows);
    } else {
        std::printf("kind: json lines\nrows: %zu\n", rows);
    }
}

void run_inspect(const std::string& path) {
    if (!fs::exists(path)) throw dacse::IoError("no such file: " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw dacse::IoError("cannot open: " + path);
    char magic[8] = {};
    in.read(magic, 8);
    const std::string head(magic, static_cast<size_t>(in.gcount()));
    if (head.rfind("DSE1CKPT", 0) == 0) {
        inspect_checkpoint(in, path);
    } else if (head.rfind("DSE1", 0) == 0) {
        inspect_dataset(path);
    } else if (head.rfind("RVQ1", 0) == 0) {
        inspect_codebooks(path);
    } else if (head.rfind("RIFF", 0) == 0) {
        inspect_wav(path);
    } else {
        inspect_json_like(path);
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DAC-token speech enhancement pipeline"};
    app.set_version_flag("--version", kVersionLine);
    app.require_subcommand(1);

    DegradeOpts dg;
    auto* c_dg = app.add_subcommand("degrade", "Synthesize distorted copies of clean clips");
    c_dg->add_option("--clean-dir", dg.clean_dir, "directory of clean .wav clips")->required();
    c_dg->add_option("--assets", dg.assets, "noise/RIR manifest (JSONL)")->required();
    c_dg->add_option("--out", dg.out, "output directory")->required();
    c_dg->add_option("--seed", dg.seed, "random seed");
    c_dg->add_option("--jobs", dg.jobs, "worker threads");

    CodecTrainOpts ct;
    auto* c_ct = app.add_subcommand("codec-train", "Fit RVQ codebooks on clean speech frames");
    c_ct->add_option("--clean-dir", ct.clean_dir, "directory of clean .wav clips")->required();
    c_ct->add_option("--out", ct.out, "output codebook file")->required();
    c_ct->add_option("--profile", ct.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    c_ct->add_option("--iters", ct.iters, "k-means iterations per book");
    c_ct->add_option("--seed", ct.seed, "k-means seed");
    c_ct->add_option("--jobs", ct.jobs, "worker threads");

    TokenizeOpts tk;
    auto* c_tk = app.add_subcommand("tokenize", "Encode audio into flattened RVQ token streams");
    c_tk->add_option("--in", tk.in, "input .wav file or directory")->required();
    c_tk->add_option("--codec", tk.codec, "RVQ codebook file")->required();
    c_tk->add_option("--out", tk.out, "output DSE1 token file")->required();
    c_tk->add_option("--jobs", tk.jobs, "worker threads");

    DatasetBuildOpts db;
    auto* c_db = app.add_subcommand("dataset-build", "Build stage-1/stage-2 training datasets");
    c_db->add_option("--clean-dir", db.clean_dir, "directory of clean .wav clips")->required();
    c_db->add_option("--assets", db.assets, "noise/RIR manifest (JSONL)")->required();
    c_db->add_option("--codec", db.codec, "RVQ codebook file")->required();
    c_db->add_option("--out", db.out, "output directory")->required();
    c_db->add_option("--profile", db.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    c_db->add_option("--seed", db.seed, "random seed");
    c_db->add_option("--jobs", db.jobs, "worker threads");

    TrainOpts tr;
    auto* c_tr = app.add_subcommand("train", "Train the token translation model");
    c_tr->add_option("--plan", tr.plan, "train plan file")->required();
    c_tr->add_option("--data", tr.data, "dataset catalog (file or directory)")->required();
    c_tr->add_option("--out", tr.out, "output directory")->required();
    c_tr->add_option("--resume", tr.resume, "checkpoint to resume from");
    c_tr->add_option("--stage1", tr.stage1, "stage-1 checkpoint (stage2 plans)");
    c_tr->add_option("--profile", tr.profile, "desk or paper")->check(CLI::IsMember({"desk", "paper"}));
    c_tr->add_option("--max-steps", tr.max_steps, "stop after this many steps this session");
    c_tr->add_option("--seed", tr.seed, "override the plan's seed");

    EnhanceCliOpts en;
    auto* c_en = app.add_subcommand("enhance", "Enhance a noisy recording");
    c_en->add_option("--in", en.in, "input .wav")->required();
    c_en->add_option("--out", en.out, "output .wav")->required();
    c_en->add_option("--ckpt", en.ckpt, "model checkpoint")->required();
    c_en->add_option("--codec", en.codec, "RVQ codebook file")->required();
    c_en->add_option("--temp", en.temp, "sampling temperature (0 = greedy)");
    c_en->add_option("--top-k", en.top_k, "restrict sampling to the k best codes");
    c_en->add_option("--chunk-s", en.chunk_s, "segmentation length in seconds");
    c_en->add_option("--seed", en.seed, "sampling seed");

    EvalOpts ev;
    auto* c_ev = app.add_subcommand("eval", "Objective metrics for enhanced audio");
    c_ev->add_option("--ref-dir", ev.ref_dir, "reference .wav directory")->required();
    c_ev->add_option("--est-dir", ev.est_dir, "estimate .wav directory")->required();
    c_ev->add_option("--out", ev.out, "report JSON path");
    c_ev->add_option("--png-dir", ev.png_dir, "write spectrogram PNGs here");
    c_ev->add_option("--jobs", ev.jobs, "worker threads");

    std::string inspect_path;
    auto* c_in = app.add_subcommand("inspect", "Describe a pipeline artifact");
    c_in->add_option("path", inspect_path, "artifact file")->required();

    try {
        app.parse(argc, argv);
        if (c_dg->parsed()) run_degrade(dg);
        if (c_ct->parsed()) run_codec_train(ct);
        if (c_tk->parsed()) run_tokenize(tk);
        if (c_db->parsed()) run_dataset_build(db);
        if (c_tr->parsed()) run_train(tr);
        if (c_en->parsed()) run_enhance(en);
        if (c_ev->parsed()) run_eval(ev);
        if (c_in->parsed()) run_inspect(inspect_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const dacse::Error& e) {
        std::fprintf(stderr, "dacse: error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "dacse: internal error: %s\n", e.what());
        return 1;
    }
    return 0;
}

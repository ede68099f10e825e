// apixelhop: synth | train | predict | eval | inspect
// Exit codes: 0 ok, 1 runtime failure, 2 usage error.

#include <sys/stat.h>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <apixelhop/apixelhop.hpp>

namespace fs = std::filesystem;
using namespace apixelhop;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainFlags {
    double val_frac = 0.2;
    int n_sel = 2;
    double p = 20.0;
    int tail = 13;
    int blocks = 64;
    std::optional<int> target_side;
    std::uint64_t seed = 7;
    int trees = 100;
    int depth = 6;
    bool store_full = false;
    std::string report_channels;
    std::string manifest;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--val-frac", f.val_frac, "validation fraction per class")->capture_default_str();
    cmd->add_option("--n-sel", f.n_sel, "channels kept per unit (1-4)")->capture_default_str();
    cmd->add_option("--p", f.p, "two-end sampling percent")->capture_default_str();
    cmd->add_option("--tail", f.tail, "samples per tail")->capture_default_str();
    cmd->add_option("--blocks-per-image", f.blocks, "attentive blocks per image (K)")->capture_default_str();
    cmd->add_option("--target-side", f.target_side, "downscale so the short side equals this");
    cmd->add_option("--seed", f.seed, "seed")->capture_default_str();
    cmd->add_option("--trees", f.trees, "boosting rounds per channel classifier")->capture_default_str();
    cmd->add_option("--depth", f.depth, "tree depth per channel classifier")->capture_default_str();
    cmd->add_flag("--store-full", f.store_full, "store every kernel of each unit, not only selected ones");
    cmd->add_option("--report-channels", f.report_channels, "write per-channel AUC CSV here");
    cmd->add_option("--manifest", f.manifest, "write the train/val manifest CSV here");
}

DetectorConfig detector_config(const TrainFlags& f) {
    DetectorConfig cfg;
    cfg.attention.blocks_per_image = f.blocks;
    cfg.boost.n_trees = f.trees;
    cfg.boost.max_depth = f.depth;
    cfg.ensemble.p = f.p;
    cfg.ensemble.tail = f.tail;
    cfg.n_sel_per_unit = f.n_sel;
    cfg.val_fraction = f.val_frac;
    cfg.target_side = f.target_side;
    cfg.seed = f.seed;
    cfg.store_full_units = f.store_full;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

std::time_t mtime_of(const fs::path& p) {
    struct stat st {};
    if (::stat(p.c_str(), &st) != 0) fail(Errc::IoError, "cannot stat " + p.string());
    return st.st_mtime;
}

// SOURCE_DATE_EPOCH if set, else the newest corpus file's mtime; never the
// wall clock, so identical inputs give identical model files.
std::string creation_stamp(std::initializer_list<const LabeledSet*> sets) {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
        try {
            return iso8601_utc(static_cast<std::time_t>(std::stoll(env)));
        } catch (const std::exception&) {
            fail(Errc::InvalidArgument, "SOURCE_DATE_EPOCH is not an integer");
        }
    }
    std::time_t newest = 0;
    for (const LabeledSet* s : sets)
        for (const auto& it : s->items) newest = std::max(newest, mtime_of(it.path));
    return iso8601_utc(newest);
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot write " + path.string());
    out << text;
    if (!out) fail(Errc::IoError, "write failed for " + path.string());
}

std::string fixed6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void progress(const std::string& s) { std::cerr << "[train] " << s << '\n'; }

TrainResult run_training(const LabeledSet& train, const LabeledSet& val, const DetectorConfig& cfg,
                         const TrainFlags& f, unsigned threads) {
    std::ostringstream manifest;
    write_manifest(manifest, {&train, &val});
    if (!f.manifest.empty()) write_text(f.manifest, manifest.str());
    std::cerr << "[train] " << train.size() << " training and " << val.size() << " validation images\n";
    TrainResult res = train_detector(train, val, cfg, threads, progress);
    res.model.provenance = {creation_stamp({&train, &val}), sha256_hex(manifest.str())};
    if (!f.report_channels.empty()) {
        std::ostringstream csv;
        write_channel_report(csv, res.selection);
        write_text(f.report_channels, csv.str());
    }
    return res;
}

void print_bank(std::ostream& out, const ChannelBank& bank) {
    out << "selected channels (" << bank.size() << "):\n";
    out << "  unit  channel  train_auc  val_auc\n";
    for (const auto& r : bank.selected) {
        char line[96];
        std::snprintf(line, sizeof line, "  %dx%dx3 %7d  %9.4f  %7.4f\n", r.key.unit, r.key.unit, r.key.k, r.train_auc,
                      r.val_auc);
        out << line;
    }
}

int cmd_synth(const fs::path& out, std::size_t n, std::uint64_t seed, int side, int factor, unsigned threads) {
    SynthConfig cfg{n, side, seed, factor};
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    write_corpus(out, cfg, threads);
    std::cout << "wrote " << n << " real and " << n << " fake images to " << out.string() << '\n';
    return kExitOk;
}

int cmd_train(const fs::path& real, const fs::path& fake, const fs::path& out, const TrainFlags& f, unsigned threads) {
    const DetectorConfig cfg = detector_config(f);
    const auto [train, val] = scan_corpus(real, fake, {cfg.val_fraction, cfg.seed});
    const TrainResult res = run_training(train, val, cfg, f, threads);
    save(res.model, out);
    print_bank(std::cout, res.model.bank);
    std::cout << '\n';
    print_param_report(std::cout, param_report(res.model));
    std::cout << "model written to " << out.string() << '\n';
    return kExitOk;
}

struct Scored {
    bool ok = false;
    double score = 0.0;
    std::string error;
    RgbImage image;
};

std::vector<Scored> score_paths(const std::vector<fs::path>& paths, const DetectorModel& model, unsigned threads,
                                bool keep_images) {
    std::vector<Scored> out(paths.size());
    parallel_for(paths.size(), threads, [&](std::size_t i) {
        try {
            RgbImage img = load_image(paths[i], image_options(model.config));
            out[i].score = predict_image(img, model).score;
            out[i].ok = true;
            if (keep_images) out[i].image = std::move(img);
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

int cmd_predict(const fs::path& model_path, const std::vector<std::string>& images, double threshold,
                const std::string& out_path, const std::string& attention_dir, unsigned threads) {
    const DetectorModel model = load(model_path);
    std::vector<fs::path> paths(images.begin(), images.end());
    const auto scored = score_paths(paths, model, threads, !attention_dir.empty());
    if (!attention_dir.empty()) fs::create_directories(attention_dir);

    std::ostringstream csv;
    int skipped = 0;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!scored[i].ok) {
            std::cerr << "skipped " << paths[i].string() << ": " << scored[i].error << '\n';
            ++skipped;
            continue;
        }
        csv << paths[i].string() << ',' << fixed6(scored[i].score) << ','
            << (scored[i].score >= threshold ? "fake" : "real") << '\n';
        if (!attention_dir.empty()) {
            const RgbImage& img = scored[i].image;
            const auto mask = attention_mask(img, select_blocks(img, model.config.attention));
            const fs::path dst = fs::path(attention_dir) / (paths[i].stem().string() + "_attention.png");
            write_png(dst, img.width, img.height, 1, mask);
        }
    }
    if (out_path.empty())
        std::cout << csv.str();
    else
        write_text(out_path, csv.str());
    return skipped > 0 ? kExitRuntime : kExitOk;
}

struct Subset {
    std::string name;
    fs::path real;
    fs::path fake;
};

Subset parse_subset(const std::string& spec) {
    const auto a = spec.find(':');
    const auto b = a == std::string::npos ? a : spec.find(':', a + 1);
    if (a == std::string::npos || b == std::string::npos || a == 0)
        throw UsageError("--subset expects NAME:REAL_DIR:FAKE_DIR, got '" + spec + "'");
    return {spec.substr(0, a), spec.substr(a + 1, b - a - 1), spec.substr(b + 1)};
}

struct SubsetResult {
    std::string name;
    double auc, ap, acc;
    std::size_t n_real, n_fake;
};

SubsetResult evaluate_subset(const Subset& s, const DetectorModel& model, double threshold, unsigned threads) {
    const LabeledSet set = labeled_dirs(s.real, s.fake, SplitTag::Test);
    std::vector<fs::path> paths;
    for (const auto& it : set.items) paths.push_back(it.path);
    const auto scored = score_paths(paths, model, threads, false);
    ScoredSet ss;
    for (std::size_t i = 0; i < paths.size(); ++i) {
        if (!scored[i].ok) fail(Errc::DecodeError, paths[i].string() + ": " + scored[i].error);
        ss.push_back({scored[i].score, static_cast<int>(set.items[i].label)});
    }
    return {s.name, auc(ss), average_precision(ss), accuracy(ss, threshold), set.count(Label::Real),
            set.count(Label::Fake)};
}

std::string eval_csv(const std::vector<SubsetResult>& rows) {
    std::ostringstream csv;
    csv << "subset,auc,ap,acc,n_real,n_fake\n";
    double ap_sum = 0.0;
    for (const auto& r : rows) {
        csv << r.name << ',' << fixed6(r.auc) << ',' << fixed6(r.ap) << ',' << fixed6(r.acc) << ',' << r.n_real << ','
            << r.n_fake << '\n';
        ap_sum += r.ap;
    }
    csv << "mAP,," << fixed6(ap_sum / static_cast<double>(rows.size())) << ",,,\n";
    return csv.str();
}

int cmd_eval(const std::string& model_path, const std::string& real, const std::string& fake,
             const std::vector<std::string>& subset_specs, double threshold, const std::string& out_path,
             unsigned threads) {
    std::vector<Subset> subsets;
    if (!real.empty() || !fake.empty()) {
        if (real.empty() || fake.empty()) throw UsageError("--real and --fake must be given together");
        subsets.push_back({"default", real, fake});
    }
    for (const auto& s : subset_specs) subsets.push_back(parse_subset(s));
    if (subsets.empty()) throw UsageError("eval needs --real/--fake or at least one --subset");
    if (model_path.empty()) throw UsageError("eval needs --model (or --loo-root)");

    const DetectorModel model = load(model_path);
    std::vector<SubsetResult> rows;
    for (const auto& s : subsets) rows.push_back(evaluate_subset(s, model, threshold, threads));
    const std::string csv = eval_csv(rows);
    if (out_path.empty())
        std::cout << csv;
    else
        write_text(out_path, csv);
    return kExitOk;
}

// Leave-one-out over the subdirectories of `root`, each holding real/ and
// fake/: train on all other subsets, evaluate on the held-out one.
int cmd_loo(const fs::path& root, const TrainFlags& f, double threshold, const std::string& out_path,
            unsigned threads) {
    const DetectorConfig cfg = detector_config(f);
    std::vector<Subset> subsets;
    std::error_code ec;
    if (!fs::is_directory(root, ec)) fail(Errc::IoError, "not a directory: " + root.string());
    for (const auto& entry : fs::directory_iterator(root))
        if (entry.is_directory() && fs::is_directory(entry.path() / "real") && fs::is_directory(entry.path() / "fake"))
            subsets.push_back({entry.path().filename().string(), entry.path() / "real", entry.path() / "fake"});
    std::sort(subsets.begin(), subsets.end(), [](const Subset& a, const Subset& b) { return a.name < b.name; });
    if (subsets.size() < 2) fail(Errc::InvalidArgument, "leave-one-out needs at least two subsets under " + root.string());

    std::vector<SubsetResult> rows;
    for (std::size_t held = 0; held < subsets.size(); ++held) {
        std::vector<fs::path> real, fake;
        for (std::size_t j = 0; j < subsets.size(); ++j) {
            if (j == held) continue;
            const auto r = list_images(subsets[j].real);
            const auto k = list_images(subsets[j].fake);
            real.insert(real.end(), r.begin(), r.end());
            fake.insert(fake.end(), k.begin(), k.end());
        }
        if (real.empty() || fake.empty()) fail(Errc::EmptyClass, "training subsets lack one class");
        std::cerr << "[loo] holding out " << subsets[held].name << '\n';
        const auto [train, val] = split_items(real, fake, {cfg.val_fraction, cfg.seed});
        const TrainResult res = run_training(train, val, cfg, f, threads);
        rows.push_back(evaluate_subset(subsets[held], res.model, threshold, threads));
    }
    const std::string csv = eval_csv(rows);
    if (out_path.empty())
        std::cout << csv;
    else
        write_text(out_path, csv);
    return kExitOk;
}

int cmd_inspect(const fs::path& model_path) {
    const DetectorModel m = load(model_path);
    const auto& c = m.config;
    std::cout << "A-PixelHop model " << model_path.string() << '\n'
              << "  created " << m.provenance.created << ", manifest sha256 " << m.provenance.manifest_sha256 << '\n'
              << "  blocks per image " << c.attention.blocks_per_image << ", channel classifiers "
              << c.boost.n_trees << " trees x depth " << c.boost.max_depth << ", ensemble " << c.ensemble.meta.n_trees
              << " trees x depth " << c.ensemble.meta.max_depth << ", p " << c.ensemble.p << ", tail "
              << c.ensemble.tail << ", unit storage " << (c.store_full_units ? "full" : "selected") << "\n\n";
    print_bank(std::cout, m.bank);
    std::cout << '\n';
    print_param_report(std::cout, param_report(m));
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"A-PixelHop fake-image detector"};
    app.require_subcommand(1);
    app.fallthrough();
    std::optional<unsigned> threads_flag;
    app.add_option("--threads", threads_flag, "worker threads (default: APIX_THREADS, else all cores)")
        ->check(CLI::PositiveNumber);

    std::string synth_out;
    std::size_t synth_n = 100;
    std::uint64_t synth_seed = 7;
    int synth_side = 256;
    int synth_factor = 4;
    auto* synth = app.add_subcommand("synth", "generate a synthetic real/fake corpus");
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--n", synth_n, "images per class")->capture_default_str();
    synth->add_option("--seed", synth_seed, "seed")->capture_default_str();
    synth->add_option("--side", synth_side, "image side in pixels")->capture_default_str();
    synth->add_option("--upsample-factor", synth_factor, "fake upsampling factor")->capture_default_str();

    std::string train_real, train_fake, train_out;
    TrainFlags train_flags;
    auto* train = app.add_subcommand("train", "train a detector");
    train->add_option("--real", train_real, "directory of real images")->required();
    train->add_option("--fake", train_fake, "directory of fake images")->required();
    train->add_option("--out", train_out, "model file to write")->required();
    add_train_flags(train, train_flags);

    std::string predict_model, predict_out, predict_attention;
    std::vector<std::string> predict_images;
    double predict_threshold = 0.5;
    auto* predict = app.add_subcommand("predict", "score images");
    predict->add_option("--model", predict_model, "model file")->required();
    predict->add_option("images", predict_images, "image files")->required();
    predict->add_option("--threshold", predict_threshold, "fake if score >= threshold")->capture_default_str();
    predict->add_option("--out", predict_out, "write CSV here instead of stdout");
    predict->add_option("--dump-attention", predict_attention, "write attention masks to this directory");

    std::string eval_model, eval_real, eval_fake, eval_out, eval_loo;
    std::vector<std::string> eval_subsets;
    double eval_threshold = 0.5;
    TrainFlags loo_flags;
    auto* eval = app.add_subcommand("eval", "evaluate on labelled subsets");
    eval->add_option("--model", eval_model, "model file");
    eval->add_option("--real", eval_real, "directory of real images");
    eval->add_option("--fake", eval_fake, "directory of fake images");
    eval->add_option("--subset", eval_subsets, "NAME:REAL_DIR:FAKE_DIR (repeatable)");
    eval->add_option("--threshold", eval_threshold, "fake if score >= threshold")->capture_default_str();
    eval->add_option("--out", eval_out, "write CSV here instead of stdout");
    eval->add_option("--loo-root", eval_loo, "leave-one-out over ROOT/<subset>/{real,fake}");
    add_train_flags(eval, loo_flags);

    std::string inspect_model;
    auto* inspect = app.add_subcommand("inspect", "print a model summary and parameter count");
    inspect->add_option("--model", inspect_model, "model file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        const unsigned threads = resolve_threads(threads_flag);
        if (*synth) return cmd_synth(synth_out, synth_n, synth_seed, synth_side, synth_factor, threads);
        if (*train) return cmd_train(train_real, train_fake, train_out, train_flags, threads);
        if (*predict)
            return cmd_predict(predict_model, predict_images, predict_threshold, predict_out, predict_attention,
                               threads);
        if (*eval) {
            if (!eval_loo.empty()) return cmd_loo(eval_loo, loo_flags, eval_threshold, eval_out, threads);
            return cmd_eval(eval_model, eval_real, eval_fake, eval_subsets, eval_threshold, eval_out, threads);
        }
        if (*inspect) return cmd_inspect(inspect_model);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error (" << to_string(e.code()) << "): " << e.what() << '\n';
        return kExitRuntime;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0
//
// gcodec command-line tool: train | eval | compress | decompress | profile |
// ingest. Exit codes: 0 success, 2 usage, 3 data, 4 model mismatch.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "gcodec/coder.hpp"
#include "gcodec/codec.hpp"
#include "gcodec/dataset.hpp"
#include "gcodec/image.hpp"
#include "gcodec/metrics.hpp"
#include "gcodec/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace gcodec;

namespace {

std::vector<double> default_lambda_grid() {
    // 8 log-spaced values in [1e-3, 2e-1]
    std::vector<double> grid(8);
    const double lo = std::log(1e-3), hi = std::log(2e-1);
    for (int i = 0; i < 8; ++i) grid[i] = std::exp(lo + (hi - lo) * i / 7.0);
    return grid;
}

struct Settings {
    CodecConfig codec;
    TrainConfig train;
    Settings() { train.lambda_set = default_lambda_grid(); }
};

void apply_codec_key(CodecConfig& c, const std::string& key, const json& v) {
    if (key == "image_channels") c.image_channels = v.get<int>();
    else if (key == "base_channels") c.base_channels = v.get<int>();
    else if (key == "latent_channels") c.latent_channels = v.get<int>();
    else if (key == "entropy_mode") {
        const auto s = v.get<std::string>();
        if (s == "scale_only") c.entropy_mode = EntropyMode::ScaleOnly;
        else if (s == "mean_scale") c.entropy_mode = EntropyMode::MeanScale;
        else throw std::invalid_argument("config: unknown entropy_mode " + s);
    } else if (key == "nonlinearity") c.nonlinearity = v.get<std::string>();
    else if (key == "gate_every_layer_except_first") c.gate_every_layer_except_first = v.get<bool>();
    else if (key == "modulator_enabled") c.modulator_enabled = v.get<bool>();
    else if (key == "epsilon") c.epsilon = v.get<double>();
    else if (key == "modulator_hidden") c.modulator_hidden = v.get<int>();
    else if (key == "modulator_log_lambda") c.modulator_log_lambda = v.get<bool>();
    else if (key == "tied_reciprocal") c.tied_reciprocal = v.get<bool>();
    else throw std::invalid_argument("config: unknown codec key '" + key + "'");
}

void apply_train_key(TrainConfig& t, const std::string& key, const json& v) {
    if (key == "lambda_set") t.lambda_set = v.get<std::vector<double>>();
    else if (key == "gamma") t.gamma = v.get<double>();
    else if (key == "alpha_target") t.alpha_target = v.get<double>();
    else if (key == "steps") t.steps = v.get<int>();
    else if (key == "batch_size") t.batch_size = v.get<int>();
    else if (key == "learning_rate") t.learning_rate = v.get<double>();
    else if (key == "seed") t.seed = v.get<uint64_t>();
    else if (key == "stage") t.stage = stage_from_name(v.get<std::string>());
    else if (key == "freeze_backbone") t.freeze_backbone = v.get<bool>();
    else if (key == "checkpoint_interval") t.checkpoint_interval = v.get<int>();
    else throw std::invalid_argument("config: unknown train key '" + key + "'");
}

Settings load_settings(const std::string& config_path,
                       const std::vector<std::string>& overrides) {
    Settings s;
    if (!config_path.empty()) {
        std::ifstream is(config_path);
        if (!is) throw std::runtime_error("cannot open config " + config_path);
        json j = json::parse(is);
        for (auto& [section, body] : j.items()) {
            if (section == "codec") {
                for (auto& [k, v] : body.items()) apply_codec_key(s.codec, k, v);
            } else if (section == "train") {
                for (auto& [k, v] : body.items()) apply_train_key(s.train, k, v);
            } else {
                throw std::invalid_argument("config: unknown section '" + section + "'");
            }
        }
    }
    // --set section.key=value; later entries win
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("--set expects section.key=value: " + ov);
        const std::string path = ov.substr(0, eq);
        json parsed = json::parse(ov.substr(eq + 1), nullptr, false);
        const json v = parsed.is_discarded() ? json(ov.substr(eq + 1)) : parsed;
        const auto dot = path.find('.');
        if (dot == std::string::npos)
            throw std::invalid_argument("--set expects section.key=value: " + ov);
        const std::string section = path.substr(0, dot), key = path.substr(dot + 1);
        if (section == "codec") apply_codec_key(s.codec, key, v);
        else if (section == "train") apply_train_key(s.train, key, v);
        else throw std::invalid_argument("--set: unknown section '" + section + "'");
    }
    return s;
}

std::string resolve_data_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("GCODEC_DATA_DIR")) return env;
    throw std::invalid_argument("no data directory (use --data or GCODEC_DATA_DIR)");
}

// Loads a patch store (manifest.jsonl) or a directory of same-sized images.
std::unique_ptr<PatchSource> open_patch_source(const std::string& dir) {
    if (fs::exists(fs::path(dir) / "manifest.jsonl"))
        return std::make_unique<DirectoryPatches>(dir);
    std::vector<Tensor> patches;
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path().string()))
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        Tensor img = load_image(f);
        if (img.h() % 16 != 0 || img.w() % 16 != 0) {
            std::fprintf(stderr, "warning: skipping %s (dims not divisible by 16)\n", f.c_str());
            continue;
        }
        if (!patches.empty() && !patches.front().same_shape(img))
            throw std::runtime_error("training images must share one shape: " + f);
        patches.push_back(std::move(img));
    }
    if (patches.empty()) throw std::runtime_error("no usable training images in " + dir);
    return std::make_unique<InMemoryPatches>(std::move(patches));
}

std::vector<std::string> list_images(const std::string& dir) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && is_image_file(e.path().string()))
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no images in " + dir);
    return files;
}

Tensor clamp01(const Tensor& t) {
    Tensor out = t;
    for (size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], 0.0, 1.0);
    return out;
}

Tensor crop_to(const Tensor& t, int h, int w) {
    Tensor out(t.n(), t.c(), h, w);
    for (int n = 0; n < t.n(); ++n)
        for (int c = 0; c < t.c(); ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) out.at(n, c, y, x) = t.at(n, c, y, x);
    return out;
}

void warn_if_off_grid(double lam, const std::vector<double>& grid) {
    const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
    if (lam < *lo || lam > *hi)
        std::fprintf(stderr,
                     "warning: lambda %.6g outside the trained range [%.6g, %.6g]; "
                     "extrapolation is unverified\n",
                     lam, *lo, *hi);
}

RDRecord eval_one(CodecState& state, const std::string& path, const Tensor& img, double lam) {
    Tensor padded = reflect_pad_to_multiple(img, 16);
    ForwardOptions opts;
    opts.lam = lam;
    ForwardResult fr = state.forward(padded, opts);

    RDRecord rec;
    rec.image = fs::path(path).filename().string();
    rec.lambda = lam;
    rec.bpp = bits_per_pixel(fr.rate_bits_main + fr.rate_bits_hyper, img.w(), img.h());
    Tensor rec_img = crop_to(fr.reconstruction, img.h(), img.w());
    rec.psnr_db = psnr(img, clamp01(rec_img));
    if (!fr.gate_masks.empty()) {
        FlopLedger ledger =
            effective_flops(state.layer_table(padded.h(), padded.w()), fr.gate_masks);
        rec.sparsity = ledger.flop_weighted_sparsity;
    }
    return rec;
}

int cmd_train(const Settings& settings, const std::string& data_dir,
              const std::string& checkpoint_in, const std::string& out_path) {
    Settings s = settings;
    CodecState state = [&]() {
        if (!checkpoint_in.empty()) return load_checkpoint(checkpoint_in);
        if (s.train.stage != Stage::FixedRate)
            throw std::invalid_argument("train: stage " + stage_name(s.train.stage) +
                                        " needs a pretrained --checkpoint");
        return build_codec(s.codec, s.train.seed);
    }();
    auto source = open_patch_source(resolve_data_dir(data_dir));
    s.train.checkpoint_path = out_path;
    if (s.train.log_path.empty()) s.train.log_path = out_path + ".log.jsonl";
    TrainResult r = train(state, *source, s.train);
    if (s.train.steps == 0) save_checkpoint(state, out_path);
    std::printf("trained %zu steps (stage %s), checkpoint %s\n", r.log.size(),
                stage_name(s.train.stage).c_str(), out_path.c_str());
    if (r.aborted) {
        std::fprintf(stderr, "training aborted on non-finite loss\n");
        return 3;
    }
    return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data_dir,
             const std::vector<double>& grid, const std::string& out_path) {
    CodecState state = load_checkpoint(checkpoint);
    auto files = list_images(resolve_data_dir(data_dir));
    std::vector<RDRecord> records;
    for (const auto& f : files) {
        Tensor img = load_image(f, state.cfg.image_channels);
        for (double lam : grid) records.push_back(eval_one(state, f, img, lam));
    }
    const std::string csv = rd_records_to_csv(records);
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        if (!os) throw std::runtime_error("cannot write " + out_path);
        os << csv;
    } else {
        std::fputs(csv.c_str(), stdout);
    }
    std::fprintf(stderr, "evaluated %zu images x %zu lambdas\n", files.size(), grid.size());
    return 0;
}

int cmd_compress(const std::string& checkpoint, const std::string& input, double lam,
                 const std::string& out_path, const std::vector<double>& trained_grid) {
    CodecState state = load_checkpoint(checkpoint);
    warn_if_off_grid(lam, trained_grid);
    Tensor img = load_image(input, state.cfg.image_channels);
    Tensor padded = reflect_pad_to_multiple(img, 16);
    Bitstream bs = compress_image(state, padded, lam);
    bs.image_h = static_cast<uint32_t>(img.h());
    bs.image_w = static_cast<uint32_t>(img.w());
    const auto bytes = bs.to_bytes();
    std::ofstream os(out_path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + out_path);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    std::printf("%s: %zu bytes, %.4f bpp\n", out_path.c_str(), bytes.size(),
                bits_per_pixel(static_cast<double>(8 * bytes.size()), img.w(), img.h()));
    return 0;
}

int cmd_decompress(const std::string& checkpoint, const std::string& input,
                   const std::string& out_path, const std::string& original) {
    CodecState state = load_checkpoint(checkpoint);
    std::ifstream is(input, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open " + input);
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(is)),
                               std::istreambuf_iterator<char>());
    Bitstream bs = Bitstream::from_bytes(bytes);
    Tensor padded = decompress_image(state, bs);
    Tensor img =
        clamp01(crop_to(padded, static_cast<int>(bs.image_h), static_cast<int>(bs.image_w)));
    save_image(img, out_path);
    std::printf("%s: %ux%u, lambda %.6g\n", out_path.c_str(), bs.image_w, bs.image_h, bs.lambda);
    if (!original.empty()) {
        Tensor orig = load_image(original, state.cfg.image_channels);
        std::printf("psnr %.4f dB\n", psnr(orig, img));
    }
    return 0;
}

int cmd_profile(const std::string& checkpoint, const std::string& data_dir,
                const std::string& out_path) {
    CodecState state = load_checkpoint(checkpoint);
    auto files = list_images(resolve_data_dir(data_dir));
    // pool masks over all images (batch-concatenated per gate)
    std::vector<Tensor> pooled;
    int pad_h = 0, pad_w = 0;
    for (const auto& f : files) {
        Tensor img = load_image(f, state.cfg.image_channels);
        Tensor padded = reflect_pad_to_multiple(img, 16);
        if (pad_h == 0) {
            pad_h = padded.h();
            pad_w = padded.w();
        } else if (pad_h != padded.h() || pad_w != padded.w()) {
            throw std::runtime_error("profile: images must share one padded size");
        }
        ForwardOptions opts;
        ForwardResult fr = state.forward(padded, opts);
        if (pooled.empty()) {
            pooled = fr.gate_masks;
        } else {
            for (size_t g = 0; g < pooled.size(); ++g) {
                Tensor merged(pooled[g].n() + 1, pooled[g].c(), 1, 1);
                std::copy(pooled[g].data(), pooled[g].data() + pooled[g].size(), merged.data());
                std::copy(fr.gate_masks[g].data(),
                          fr.gate_masks[g].data() + fr.gate_masks[g].size(),
                          merged.data() + pooled[g].size());
                pooled[g] = std::move(merged);
            }
        }
    }
    if (pooled.empty() && state.cfg.gate_every_layer_except_first)
        throw std::runtime_error("profile: no gate masks collected");
    FlopLedger ledger = effective_flops(state.layer_table(pad_h, pad_w), pooled);
    const std::string table = ledger.table();
    if (!out_path.empty()) {
        std::ofstream os(out_path);
        os << table;
    }
    std::fputs(table.c_str(), stdout);
    return 0;
}

int cmd_ingest(const std::string& src, const std::string& out_dir, int patch,
               const std::string& scales_csv) {
    std::vector<int> scales;
    std::stringstream ss(scales_csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) scales.push_back(std::stoi(tok));
    if (scales.empty()) throw std::invalid_argument("ingest: empty scale list");
    const size_t n = ingest_dataset(resolve_data_dir(src), out_dir, patch, scales);
    std::printf("ingested %zu patches into %s\n", n, out_dir.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"gcodec: gated variable-rate image codec"};
    app.require_subcommand(1);

    std::string config_path, checkpoint, data_dir, input, out_path, original, scales = "1,2,4";
    std::vector<std::string> overrides;
    std::optional<double> lambda_flag;
    std::optional<int> steps_flag;
    std::optional<uint64_t> seed_flag;
    std::vector<double> lambda_grid_flag;
    int patch = 64;

    app.add_option("--config", config_path, "JSON config file");
    app.add_option("--set", overrides, "override config keys (section.key=value)");

    auto* t = app.add_subcommand("train", "run one training stage");
    t->add_option("--data", data_dir, "patch store or image directory");
    t->add_option("--checkpoint", checkpoint, "input checkpoint (required for later stages)");
    t->add_option("--out", out_path, "output checkpoint path")->required();
    t->add_option("--steps", steps_flag, "override train.steps");
    t->add_option("--seed", seed_flag, "override train.seed");
    t->add_option("--lambda", lambda_flag, "single lambda (overrides train.lambda_set)");

    auto* e = app.add_subcommand("eval", "rate-distortion sweep to CSV");
    e->add_option("--checkpoint", checkpoint)->required();
    e->add_option("--data", data_dir, "image directory");
    e->add_option("--lambda-grid", lambda_grid_flag, "lambda values to sweep");
    e->add_option("--lambda", lambda_flag, "single lambda");
    e->add_option("--out", out_path, "CSV output (stdout when omitted)");

    auto* c = app.add_subcommand("compress", "encode one image to a bitstream");
    c->add_option("--checkpoint", checkpoint)->required();
    c->add_option("input", input, "image file")->required();
    c->add_option("--lambda", lambda_flag, "trade-off factor");
    c->add_option("--out", out_path, "bitstream path")->required();

    auto* d = app.add_subcommand("decompress", "decode a bitstream to an image");
    d->add_option("--checkpoint", checkpoint)->required();
    d->add_option("input", input, "bitstream file")->required();
    d->add_option("--out", out_path, "image path")->required();
    d->add_option("--original", original, "reference image for PSNR");

    auto* p = app.add_subcommand("profile", "per-layer effective-FLOP ledger");
    p->add_option("--checkpoint", checkpoint)->required();
    p->add_option("--data", data_dir, "image directory");
    p->add_option("--out", out_path, "table output path");

    auto* g = app.add_subcommand("ingest", "tile images into a patch store");
    g->add_option("--data", data_dir, "source image directory");
    g->add_option("--out", out_path, "patch store directory")->required();
    g->add_option("--patch", patch, "patch size (default 64)");
    g->add_option("--scales", scales, "comma-separated downsampling factors");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 2;
    }

    try {
        Settings settings = load_settings(config_path, overrides);
        if (steps_flag) settings.train.steps = *steps_flag;
        if (seed_flag) settings.train.seed = *seed_flag;
        if (lambda_flag && t->parsed()) settings.train.lambda_set = {*lambda_flag};

        if (t->parsed()) return cmd_train(settings, data_dir, checkpoint, out_path);
        if (e->parsed()) {
            std::vector<double> grid = settings.train.lambda_set;
            if (!lambda_grid_flag.empty()) grid = lambda_grid_flag;
            if (lambda_flag) grid = {*lambda_flag};
            return cmd_eval(checkpoint, data_dir, grid, out_path);
        }
        if (c->parsed()) {
            if (!lambda_flag) throw std::invalid_argument("compress: --lambda required");
            return cmd_compress(checkpoint, input, *lambda_flag, out_path,
                                settings.train.lambda_set);
        }
        if (d->parsed()) return cmd_decompress(checkpoint, input, out_path, original);
        if (p->parsed()) return cmd_profile(checkpoint, data_dir, out_path);
        if (g->parsed()) return cmd_ingest(data_dir, out_path, patch, scales);
        return 2;
    } catch (const WrongModelError& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 4;
    } catch (const std::invalid_argument& err) {
        std::fprintf(stderr, "usage error: %s\n", err.what());
        return 2;
    } catch (const std::exception& err) {
        std::fprintf(stderr, "error: %s\n", err.what());
        return 3;
    }
}

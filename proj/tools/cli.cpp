#include "gatedflow/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "gatedflow/datagen.hpp"
#include "gatedflow/flow.hpp"
#include "gatedflow/model.hpp"
#include "gatedflow/motion.hpp"
#include "gatedflow/train.hpp"

namespace gatedflow::cli {

namespace {

namespace fs = std::filesystem;

class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

const std::map<std::string, PairKind> kKinds{{"translation", PairKind::Translation9},
                                             {"rotation", PairKind::RotationUniform}};

struct DataOptions {
    std::string kind = "translation";
    int n = 10000;
    int size = 13;
    double density = 0.1;
    std::uint64_t seed = 0;
};

void add_data_options(CLI::App* app, DataOptions& d, int default_n) {
    d.n = default_n;
    app->add_option("--kind", d.kind, "transformation family")
        ->check(CLI::IsMember({"translation", "rotation"}));
    app->add_option("--n", d.n, "number of image pairs")->check(CLI::PositiveNumber);
    app->add_option("--size", d.size, "image side length in pixels")->check(CLI::PositiveNumber);
    app->add_option("--density", d.density, "probability that a dot is on")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--seed", d.seed, "random seed");
}

std::vector<ImagePair> generate(const DataOptions& d) {
    return make_pairs(kKinds.at(d.kind), d.n, d.size, d.density, d.seed);
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError(dir, "cannot create directory");
}

int side_of(const FactoredGRBM& m) {
    const auto side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(m.inputs()))));
    if (static_cast<Eigen::Index>(side) * side != m.inputs()) {
        throw DimensionError("model input layer is not a square image");
    }
    return side;
}

std::string describe(const GlobalMotion& gm) {
    std::ostringstream os;
    if (const auto* t = std::get_if<Translation>(&gm.kind)) {
        os << "translation dx=" << t->dx << " dy=" << t->dy;
    } else if (const auto* r = std::get_if<Rotation>(&gm.kind)) {
        os << "rotation theta=" << r->theta;
    } else {
        os << "unknown";
    }
    os << " consensus=" << std::fixed << std::setprecision(4) << gm.consensus;
    return os.str();
}

double angle_gap(double a, double b) {
    const double d = std::fabs(wrap_degrees(a) - wrap_degrees(b));
    return std::min(d, 360.0 - d);
}

}  // namespace

int dispatch(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Gated RBM motion learning: train, infer max-flow fields, segment foreground"};
    app.option_defaults()->always_capture_default();
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "show help for every subcommand");

    std::function<void()> action;

    // gen-pairs ------------------------------------------------------------
    DataOptions gen;
    std::string gen_out;
    auto* gen_cmd = app.add_subcommand("gen-pairs", "generate a dataset of random-dot image pairs");
    add_data_options(gen_cmd, gen, 10000);
    gen_cmd->add_option("--out", gen_out, "output directory")->required();
    gen_cmd->callback([&] {
        action = [&] {
            const auto pairs = generate(gen);
            write_dataset(pairs, gen_out);
            out << "wrote " << pairs.size() << " pairs to " << gen_out << '\n';
        };
    });

    // gen-scene ------------------------------------------------------------
    int sc_size = 13;
    double sc_density = 0.1;
    int bg_dx = 1, bg_dy = 0, fg_dx = -1, fg_dy = 0;
    int fg_row = 4, fg_col = 4, fg_h = 4, fg_w = 4;
    std::uint64_t sc_seed = 0;
    std::string sc_out;
    auto* sc_cmd = app.add_subcommand("gen-scene", "generate a two-motion scene with a truth mask");
    sc_cmd->add_option("--size", sc_size, "image side length")->check(CLI::PositiveNumber);
    sc_cmd->add_option("--density", sc_density, "dot density")->check(CLI::Range(0.0, 1.0));
    sc_cmd->add_option("--bg-dx", bg_dx, "background shift, columns");
    sc_cmd->add_option("--bg-dy", bg_dy, "background shift, rows");
    sc_cmd->add_option("--fg-dx", fg_dx, "foreground shift, columns");
    sc_cmd->add_option("--fg-dy", fg_dy, "foreground shift, rows");
    sc_cmd->add_option("--fg-row", fg_row, "foreground block top row");
    sc_cmd->add_option("--fg-col", fg_col, "foreground block left column");
    sc_cmd->add_option("--fg-h", fg_h, "foreground block height");
    sc_cmd->add_option("--fg-w", fg_w, "foreground block width");
    sc_cmd->add_option("--seed", sc_seed, "random seed");
    sc_cmd->add_option("--out", sc_out, "output directory (x.pgm, y.pgm, truth.pgm)")->required();
    sc_cmd->callback([&] {
        action = [&] {
            const Scene s = make_scene(sc_size, sc_density, {bg_dx, bg_dy},
                                       {fg_row, fg_col, fg_h, fg_w}, {fg_dx, fg_dy}, sc_seed);
            ensure_dir(sc_out);
            pgm_write(s.pair.x, fs::path(sc_out) / "x.pgm");
            pgm_write(s.pair.y, fs::path(sc_out) / "y.pgm");
            write_mask(s.truth_mask, fs::path(sc_out) / "truth.pgm");
            out << "wrote scene to " << sc_out << '\n';
        };
    });

    // train ----------------------------------------------------------------
    DataOptions tr_data;
    TrainConfig cfg;
    std::string tr_dir;
    std::string tr_out;
    int checkpoint_every = 0;
    bool quiet = false;
    double sparsity = -1.0;
    auto* tr_cmd = app.add_subcommand("train", "train a factored gated RBM with CD-1");
    add_data_options(tr_cmd, tr_data, 10000);
    tr_cmd->add_option("--data", tr_dir, "train on a gen-pairs directory instead of generating");
    tr_cmd->add_option("--factors", cfg.factors, "number of factors")->check(CLI::PositiveNumber);
    tr_cmd->add_option("--hidden", cfg.hidden, "number of hidden (mapping) units")
        ->check(CLI::PositiveNumber);
    auto* epochs_opt = tr_cmd->add_option("--epochs", cfg.epochs,
                                          "training epochs (default 500 translation, 700 rotation)")
                           ->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--batch-size", cfg.batch_size, "pairs per minibatch")
        ->check(CLI::PositiveNumber);
    tr_cmd->add_option("--lr", cfg.learning_rate, "learning rate")->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--momentum", cfg.momentum, "momentum in [0,1)");
    tr_cmd->add_option("--target-hidden", cfg.target_hidden, "target hidden probability")
        ->check(CLI::Range(0.0, 1.0));
    tr_cmd->add_option("--sparsity-rate", sparsity,
                       "hidden-bias sparsity step (negative: 0.1 x learning rate)");
    tr_cmd->add_option("--init-std", cfg.weight_init_std, "weight init standard deviation")
        ->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--threads", cfg.threads, "worker threads (results are identical)")
        ->check(CLI::PositiveNumber);
    tr_cmd->add_option("--checkpoint-every", checkpoint_every,
                       "also write the model every N epochs (0: off)")
        ->check(CLI::NonNegativeNumber);
    tr_cmd->add_option("--out", tr_out, "output directory (model.grbm, history.csv)")->required();
    tr_cmd->add_flag("--quiet", quiet, "suppress per-epoch progress");
    tr_cmd->callback([&] {
        if (epochs_opt->count() == 0) cfg.epochs = tr_data.kind == "rotation" ? 700 : 500;
        cfg.seed = tr_data.seed;
        if (sparsity >= 0.0) cfg.sparsity_rate = sparsity;
        try {
            cfg.validate();
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        action = [&] {
            const auto pairs = tr_dir.empty() ? generate(tr_data) : read_dataset(tr_dir);
            ensure_dir(tr_out);
            const fs::path dir(tr_out);
            std::ofstream hist(dir / "history.csv");
            if (!hist) throw IoError(dir / "history.csv", "cannot open for writing");
            hist << "epoch,mse\n" << std::setprecision(17);
            const TrainReport rep = train(pairs, cfg, [&](const EpochStats& s, const FactoredGRBM& m) {
                hist << s.epoch << ',' << s.mse << '\n';
                if (!quiet) {
                    out << "epoch " << s.epoch << " mse " << s.mse << " hidden " << s.mean_hidden
                        << " (" << std::fixed << std::setprecision(2) << s.seconds << "s)\n"
                        << std::defaultfloat;
                }
                if (checkpoint_every > 0 && s.epoch % checkpoint_every == 0) {
                    std::ostringstream name;
                    name << "model_epoch" << std::setw(4) << std::setfill('0') << s.epoch << ".grbm";
                    save_model(m, dir / name.str());
                }
            });
            save_model(rep.model, dir / "model.grbm");
            if (!hist) throw IoError(dir / "history.csv", "write failed");
            out << "wrote " << (dir / "model.grbm").string() << '\n';
        };
    });

    // flow -----------------------------------------------------------------
    std::string fl_model, fl_x, fl_y, fl_out, fl_format = "arrows";
    auto* fl_cmd = app.add_subcommand("flow", "infer the max-flow field of an image pair");
    fl_cmd->add_option("--model", fl_model, "GRBM1 model file")->required();
    fl_cmd->add_option("--x", fl_x, "previous frame (PGM)")->required();
    fl_cmd->add_option("--y", fl_y, "current frame (PGM)")->required();
    fl_cmd->add_option("--out", fl_out, "output file")->required();
    fl_cmd->add_option("--format", fl_format, "arrows (text) or ppm")
        ->check(CLI::IsMember({"arrows", "ppm"}));
    fl_cmd->callback([&] {
        action = [&] {
            const FactoredGRBM m = load_model(fl_model);
            const ImagePair p{pgm_read(fl_x), pgm_read(fl_y), Identity{}};
            const FlowField f = max_flow_field(m, p);
            render_flow(f, fl_out, fl_format == "ppm" ? FlowRender::ColorPpm : FlowRender::ArrowsText);
            out << "global motion: " << describe(classify_global_motion(f)) << '\n';
        };
    });

    // analogy --------------------------------------------------------------
    std::string an_model, an_ex_x, an_ex_y, an_novel, an_out;
    auto* an_cmd = app.add_subcommand("analogy", "apply an exemplar pair's transformation to a new image");
    an_cmd->add_option("--model", an_model, "GRBM1 model file")->required();
    an_cmd->add_option("--ex-x", an_ex_x, "exemplar previous frame")->required();
    an_cmd->add_option("--ex-y", an_ex_y, "exemplar current frame")->required();
    an_cmd->add_option("--novel", an_novel, "image to transform")->required();
    an_cmd->add_option("--out", an_out, "output PGM")->required();
    an_cmd->callback([&] {
        action = [&] {
            const FactoredGRBM m = load_model(an_model);
            const ImagePair ex{pgm_read(an_ex_x), pgm_read(an_ex_y), Identity{}};
            pgm_write(analogy_reconstruct(m, ex, pgm_read(an_novel)), an_out);
            out << "wrote " << an_out << '\n';
        };
    });

    // segment --------------------------------------------------------------
    std::string sg_model, sg_x, sg_y, sg_out;
    double min_consensus = 0.5;
    double tol = 1.0;
    auto* sg_cmd = app.add_subcommand("segment", "label pixels that violate the global motion");
    sg_cmd->add_option("--model", sg_model, "GRBM1 model file")->required();
    sg_cmd->add_option("--x", sg_x, "previous frame (PGM)")->required();
    sg_cmd->add_option("--y", sg_y, "current frame (PGM)")->required();
    sg_cmd->add_option("--out", sg_out, "mask PGM (255 = foreground)")->required();
    sg_cmd->add_option("--min-consensus", min_consensus, "consensus needed for a global motion")
        ->check(CLI::Range(0.0, 1.0));
    sg_cmd->add_option("--tol", tol, "max-norm slack in pixels");
    sg_cmd->callback([&] {
        action = [&] {
            const FactoredGRBM m = load_model(sg_model);
            const ImagePair p{pgm_read(sg_x), pgm_read(sg_y), Identity{}};
            const FlowField f = max_flow_field(m, p);
            const GlobalMotion gm = classify_global_motion(f, min_consensus);
            out << "global motion: " << describe(gm) << '\n';
            if (gm.is_unknown()) throw std::runtime_error("no global motion");
            const SegMask mask = segment_foreground(f, gm, tol);
            write_mask(mask, sg_out);
            out << "foreground pixels: " << mask.count() << '\n';
        };
    });

    // eval -----------------------------------------------------------------
    std::string ev_model;
    DataOptions ev_data;
    ev_data.seed = 12345;
    double ev_tol_deg = 15.0;
    auto* ev_cmd = app.add_subcommand("eval", "score global-motion recovery on held-out pairs");
    ev_cmd->add_option("--model", ev_model, "GRBM1 model file")->required();
    add_data_options(ev_cmd, ev_data, 200);
    ev_cmd->add_option("--angle-tol", ev_tol_deg, "rotation tolerance in degrees");
    ev_cmd->callback([&] {
        action = [&] {
            const FactoredGRBM m = load_model(ev_model);
            const auto pairs = make_pairs(kKinds.at(ev_data.kind), ev_data.n, side_of(m),
                                          ev_data.density, ev_data.seed);
            std::size_t hits = 0;
            std::size_t scored = 0;
            double err = 0.0;
            for (const ImagePair& p : pairs) {
                err += recon_error(m, p);
                const FlowField f = max_flow_field(m, p);
                if (f.active_count() == 0) continue;
                ++scored;
                if (const auto* t = std::get_if<Translation>(&p.label)) {
                    hits += estimate_translation(f).shift == *t ? 1 : 0;
                } else if (const auto* r = std::get_if<Rotation>(&p.label)) {
                    hits += angle_gap(estimate_rotation(f).theta, r->theta) <= ev_tol_deg ? 1 : 0;
                }
            }
            out << "pairs " << pairs.size() << " scored " << scored << " accuracy "
                << (scored ? static_cast<double>(hits) / static_cast<double>(scored) : 0.0)
                << " recon_mse " << err / static_cast<double>(pairs.size()) << '\n';
        };
    });

    std::vector<const char*> cargv;
    cargv.reserve(argv.size());
    for (const auto& a : argv) cargv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n' << app.help("", CLI::AppFormatMode::Normal);
        return 2;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        if (action) action();
        return 0;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
}

}  // namespace gatedflow::cli

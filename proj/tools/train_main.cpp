// Desk-scale training demo: denoise synthetic bump tracks and detect peaks
// with a small dilated residual network trained by the conv kernels.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "conv1d/train.hpp"

int main(int argc, char** argv) {
    CLI::App app{"synthetic denoising training demo"};

    conv1d::TrainConfig cfg;
    std::string precision_text = "fp32";
    long long epochs = cfg.epochs, batch = cfg.batch, seed = static_cast<long long>(cfg.seed);
    long long width = cfg.width, segments = cfg.segments, blocks = cfg.blocks;
    long long threads = cfg.threads;

    app.add_option("--epochs", epochs, "training epochs");
    app.add_option("--batch", batch, "SGD batch size in segments");
    app.add_option("--lr", cfg.lr, "learning rate");
    app.add_option("--seed", seed, "dataset and init seed");
    app.add_option("--width", width, "segment width in samples");
    app.add_option("--segments", segments, "segment count (last 10% validate)");
    app.add_option("--precision", precision_text, "fp32 or bf16");
    app.add_option("--blocks", blocks, "residual block count");
    app.add_option("--bce-weight", cfg.bce_weight, "weight of the peak-head loss term");
    app.add_option("--threads", threads, "worker threads for the batch dimension");
    app.add_option("--out", cfg.curve_path, "loss-curve CSV path")->required();

    CLI11_PARSE(app, argc, argv);

    cfg.epochs = static_cast<int>(epochs);
    cfg.batch = batch;
    cfg.seed = static_cast<std::uint64_t>(seed);
    cfg.width = width;
    cfg.segments = segments;
    cfg.blocks = static_cast<int>(blocks);
    cfg.threads = static_cast<int>(threads);
    if (precision_text == "fp32") cfg.precision = conv1d::Precision::Fp32;
    else if (precision_text == "bf16") cfg.precision = conv1d::Precision::Bf16;
    else {
        std::fprintf(stderr, "train-demo: precision must be fp32 or bf16\n");
        return 1;
    }

    try {
        const auto stats = conv1d::train(cfg);
        for (const conv1d::EpochStats& s : stats) {
            std::printf("epoch %3d  train %.6f  val %.6f  auroc %.4f\n", s.epoch, s.train_loss,
                        s.val_loss, s.val_auroc);
        }
        if (!stats.empty()) {
            const auto& first = stats.front();
            const auto& last = stats.back();
            std::printf("val loss %.6f -> %.6f (%.2fx), final auroc %.4f\n", first.val_loss,
                        last.val_loss,
                        last.val_loss > 0.0 ? first.val_loss / last.val_loss : 0.0,
                        last.val_auroc);
        }
        std::printf("loss curve written to %s\n", cfg.curve_path.c_str());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "train-demo: %s\n", e.what());
        return 1;
    }
    return 0;
}

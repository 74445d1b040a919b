// Command line front end: train / enhance / eval / hist subcommands.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "pdcf/pdcf.hpp"

namespace {

int run_train(const std::string& data_dir, pdcf::TrainConfig config, const std::string& out) {
    const auto pairs = pdcf::load_dataset(data_dir, config.size, &std::cerr);
    std::cout << "# dataset: " << pairs.size() << " pairs from " << data_dir << "\n";
    const pdcf::TrainResult result = pdcf::train(pairs, config, &std::cout);
    pdcf::checkpoint_save(out, result.net);
    std::cout << "# checkpoint written to " << out << "\n";
    return 0;
}

int run_enhance(const std::string& ckpt, const std::string& in_dir, const std::string& out_dir,
                int size) {
    const pdcf::PdcfNet net = pdcf::checkpoint_load(ckpt);
    pdcf::enhance_dir(net, in_dir, out_dir, size, &std::cerr);
    return 0;
}

int run_eval(const std::string& pred_dir, const std::string& ref_dir, bool no_reference,
             const std::string& report_path) {
    const std::string effective_ref = no_reference ? std::string() : ref_dir;
    const pdcf::MetricReport report = pdcf::evaluate_dirs(pred_dir, effective_ref, &std::cerr);
    pdcf::write_report(report, report_path);
    std::cout << "# report written (" << report.rows.size() << " images, "
              << report.columns.size() << " metrics)\n";
    return 0;
}

int run_hist(const std::string& in_path, const std::string& out_path) {
    bool dropped = false;
    const pdcf::io::Image img = pdcf::io::load_image(in_path, &dropped);
    if (dropped) std::cerr << "warning: " << in_path << ": alpha channel dropped\n";
    pdcf::io::write_histogram_csv(img, out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PDCFNet underwater image enhancement toolkit"};
    app.require_subcommand(1);

    // train
    auto* train_cmd = app.add_subcommand("train", "Train a model on a paired dataset");
    std::string data_dir, ckpt_out;
    pdcf::TrainConfig tconf;
    bool no_pdc = false, no_l2 = false, no_ssim = false, no_edge = false;
    train_cmd->add_option("--data", data_dir, "Dataset root with raw/ and ref/ subdirectories")
        ->required();
    train_cmd->add_option("--epochs", tconf.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--lr", tconf.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--batch", tconf.batch, "Batch size")->capture_default_str();
    train_cmd->add_option("--size", tconf.size, "Square resize applied to every image")
        ->capture_default_str();
    train_cmd->add_option("--seed", tconf.seed, "Seed for init and shuffling")
        ->capture_default_str();
    train_cmd->add_option("--channels", tconf.network.base_channels, "Base channel width")
        ->capture_default_str();
    train_cmd->add_flag("--no-pdc", no_pdc, "Swap difference convolutions for vanilla 3x3");
    train_cmd->add_flag("--no-l2", no_l2, "Drop the l2 term from the objective");
    train_cmd->add_flag("--no-ssim-loss", no_ssim, "Drop the SSIM term from the objective");
    train_cmd->add_flag("--no-edge-loss", no_edge, "Drop the edge term from the objective");
    train_cmd->add_option("--out", ckpt_out, "Output checkpoint path")->required();

    // enhance
    auto* enhance_cmd = app.add_subcommand("enhance", "Run a checkpoint over a directory");
    std::string ckpt_in, in_dir, out_dir;
    int enhance_size = 0;
    enhance_cmd->add_option("--ckpt", ckpt_in, "Checkpoint path")->required();
    enhance_cmd->add_option("--in", in_dir, "Input image directory")->required();
    enhance_cmd->add_option("--out", out_dir, "Output directory (created if missing)")
        ->required();
    enhance_cmd->add_option("--size", enhance_size,
                            "Force square resize before the forward pass (0 = native)");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "Score a directory of images");
    std::string pred_dir, ref_dir, report_path;
    bool no_reference = false;
    eval_cmd->add_option("--pred", pred_dir, "Predictions directory")->required();
    eval_cmd->add_option("--ref", ref_dir, "References directory (enables full-reference metrics)");
    eval_cmd->add_option("--report", report_path, "Report base path (writes .csv and .json)")
        ->required();
    eval_cmd->add_flag("--no-reference", no_reference, "Restrict to the no-reference metric set");

    // hist
    auto* hist_cmd = app.add_subcommand("hist", "Dump a 256-bin per-channel histogram");
    std::string hist_in, hist_out;
    hist_cmd->add_option("--in", hist_in, "Input image")->required();
    hist_cmd->add_option("--out", hist_out, "Output CSV path")->required();

    try {
        app.parse(argc, argv);

        if (*train_cmd) {
            tconf.network.ablate_pdc = no_pdc;
            tconf.loss.use_l2 = !no_l2;
            tconf.loss.use_ssim = !no_ssim;
            tconf.loss.use_edge = !no_edge;
            try {
                tconf.validate();
            } catch (const std::exception& e) {
                // Bad flag values are usage errors, not data errors.
                std::cerr << "error: " << e.what() << "\n";
                return 1;
            }
            return run_train(data_dir, tconf, ckpt_out);
        }
        if (*enhance_cmd) return run_enhance(ckpt_in, in_dir, out_dir, enhance_size);
        if (*eval_cmd) {
            if (ref_dir.empty() && !no_reference) {
                std::cerr << "note: no --ref given, falling back to no-reference metrics\n";
            }
            return run_eval(pred_dir, ref_dir, no_reference, report_path);
        }
        if (*hist_cmd) return run_hist(hist_in, hist_out);
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const pdcf::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    }
}

// c2fnet: data generation, training, inference, evaluation, ablation and
// self-verification.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "c2f/config.hpp"
#include "c2f/data.hpp"
#include "c2f/error.hpp"
#include "c2f/image_io.hpp"
#include "c2f/metrics.hpp"
#include "c2f/network.hpp"
#include "c2f/trainer.hpp"
#include "c2f/verify/suites.hpp"

namespace fs = std::filesystem;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

c2f::TrainHooks progress_hooks(bool quiet) {
  c2f::TrainHooks hooks;
  if (!quiet) {
    hooks.on_epoch = [](int epoch, double loss) {
      std::fprintf(stderr, "epoch %d loss %.6f\n", epoch, loss);
    };
  }
  return hooks;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camouflaged object detection network: data, training and evaluation tools"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress progress output");

  c2f::SynthOptions synth;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic camouflage dataset");
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--count", synth.count, "Number of images")->capture_default_str();
  gen->add_option("--size", synth.size, "Image size (multiple of 32)")->capture_default_str();
  gen->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  gen->add_option("--contrast", synth.contrast_delta, "Object intensity shift in (0, 0.5]")
      ->capture_default_str();
  gen->add_option("--max-objects", synth.max_objects, "Maximum objects per image")
      ->capture_default_str();

  std::string config_path, data_dir, out_dir;
  auto* train = app.add_subcommand("train", "Train a network");
  train->add_option("--config", config_path, "Config file (key = value)")->required();
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--out", out_dir, "Output directory")->required();

  std::string ckpt, images_dir;
  auto* infer = app.add_subcommand("infer", "Write one PGM prediction per PPM image");
  infer->add_option("--ckpt", ckpt, "Checkpoint file")->required();
  infer->add_option("--images", images_dir, "Directory of .ppm images")->required();
  infer->add_option("--out", out_dir, "Output directory")->required();

  std::string pred_dir, gt_dir, report_path;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", pred_dir, "Directory of predicted .pgm maps")->required();
  eval->add_option("--gt", gt_dir, "Directory of ground-truth .pgm masks")->required();
  eval->add_option("--out", report_path, "CSV report path")->required();

  auto* ablate = app.add_subcommand("ablate", "Train and evaluate all five variants");
  ablate->add_option("--config", config_path, "Config file (key = value)")->required();
  ablate->add_option("--data", data_dir, "Directory with train/ and test/ datasets")->required();
  ablate->add_option("--out", out_dir, "Output directory")->required();

  std::vector<std::string> suites;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the oracle suites");
  selfcheck->add_option("--suite", suites, "Run only these suites");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      const auto m = c2f::synth_generate(gen_out, synth);
      if (!quiet) std::printf("wrote %zu samples to %s\n", m.ids.size(), gen_out.c_str());
    } else if (*train) {
      const c2f::Config cfg = c2f::load_config(config_path);
      const auto manifest = c2f::load_manifest(data_dir);
      const auto r = c2f::train(manifest, cfg, out_dir, progress_hooks(quiet));
      if (!quiet) {
        std::printf("final loss %.6f after %lld steps, checkpoint %s\n", r.epoch_loss.back(),
                    static_cast<long long>(r.steps), r.checkpoint.string().c_str());
      }
    } else if (*infer) {
      auto params = c2f::load_checkpoint(ckpt);
      const int n = c2f::infer_directory(params, images_dir, out_dir);
      if (!quiet) std::printf("wrote %d predictions to %s\n", n, out_dir.c_str());
    } else if (*eval) {
      const auto report = c2f::evaluate_set(pred_dir, gt_dir);
      const std::string csv = c2f::report_csv(report);
      c2f::write_binary_file(report_path, csv);
      if (!quiet) std::fputs(csv.c_str() + csv.rfind("MEAN"), stdout);
    } else if (*ablate) {
      const c2f::Config cfg = c2f::load_config(config_path);
      const auto rows = c2f::ablate(cfg, data_dir, out_dir, progress_hooks(quiet));
      std::fputs(c2f::ablation_csv(rows).c_str(), stdout);
    } else if (*selfcheck) {
      if (suites.empty()) suites = c2f::verify::suite_names();
      bool all = true;
      for (const auto& name : suites) {
        const auto r = c2f::verify::run_suite(name);
        if (!quiet) {
          for (const auto& line : r.lines) std::printf("  %s\n", line.c_str());
        }
        std::printf("%-16s %s (%.1fs)\n", name.c_str(), r.passed ? "PASS" : "FAIL", r.seconds);
        std::fflush(stdout);
        all = all && r.passed;
      }
      return all ? kOk : kNumeric;
    }
  } catch (const c2f::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kNumeric;
  } catch (const c2f::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const c2f::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const c2f::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const c2f::ShapeError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}

#include <CLI11.hpp>

#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "vibxai/io.hpp"
#include "vibxai/pipeline.hpp"

namespace {

using namespace vibxai;

struct Options {
  std::string config;
  std::string domain = "frequency";
  std::string method = "gradcam";
  std::string cls = "cutoff";
  std::string out;
  std::string map;
};

pipeline::PipelineConfig load(const Options& o) {
  return o.config.empty() ? pipeline::config_from_json("{}") : pipeline::load_config(o.config);
}

void report(const std::vector<std::filesystem::path>& written) {
  for (const auto& p : written) std::cout << "wrote " << p.string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vibration maps, CNN classifier and saliency explanations"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("-c,--config", o.config, "JSON pipeline config")->check(CLI::ExistingFile);

  auto* gen = app.add_subcommand("generate", "Synthesize the sine cut-off train/test datasets");
  auto* ingest = app.add_subcommand("ingest", "Cut recorded CSV files into labelled windows");
  auto* transform = app.add_subcommand("transform", "Compute frequency- or order-rpm maps");
  auto* train = app.add_subcommand("train", "Train the classifier on one domain");
  auto* explain = app.add_subcommand("explain", "Compute saliency maps for one method and class");
  auto* render = app.add_subcommand("render", "Render a map file as a heatmap image");
  auto* run = app.add_subcommand("run", "generate, transform, train, explain and render in one go");
  auto* dump = app.add_subcommand("config", "Print the effective configuration as JSON");

  const std::vector<std::string> domains{"frequency", "order"};
  for (auto* sub : {transform, train, explain, run})
    sub->add_option("-d,--domain", o.domain, "frequency or order")->check(CLI::IsMember(domains));
  for (auto* sub : {explain, run}) {
    sub->add_option("-m,--method", o.method, "gradcam, gradcam_pp, scorecam, lrp_z, lrp_eps, lime_global");
    sub->add_option("--class", o.cls, "explained class (normal or cutoff)");
  }
  render->add_option("map", o.map, "binary .rpm or .sal file")->required()->check(CLI::ExistingFile);
  render->add_option("-o,--out", o.out, "image path (default: map path with .ppm)");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(o);
    const auto axis = io::parse_axis(o.domain);
    if (*gen) {
      report(pipeline::cmd_generate(cfg, std::cout));
    } else if (*ingest) {
      report(pipeline::cmd_ingest(cfg, std::cout));
    } else if (*transform) {
      report(pipeline::cmd_transform(cfg, axis, std::cout));
    } else if (*train) {
      report(pipeline::cmd_train(cfg, axis, std::cout));
    } else if (*explain) {
      report(pipeline::cmd_explain(cfg, xai::parse_method(o.method), parse_label(o.cls), axis, std::cout));
    } else if (*render) {
      std::optional<std::filesystem::path> out;
      if (!o.out.empty()) out = o.out;
      report(pipeline::cmd_render(cfg, o.map, out, std::cout));
    } else if (*run) {
      const auto method = xai::parse_method(o.method);
      const auto cls = parse_label(o.cls);
      report(pipeline::cmd_generate(cfg, std::cout));
      report(pipeline::cmd_transform(cfg, axis, std::cout));
      report(pipeline::cmd_train(cfg, axis, std::cout));
      const auto sal = pipeline::cmd_explain(cfg, method, cls, axis, std::cout);
      report(sal);
      report(pipeline::cmd_render(cfg, sal.front(), std::nullopt, std::cout));
    } else if (*dump) {
      std::cout << pipeline::config_to_json(cfg) << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "vibxai: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

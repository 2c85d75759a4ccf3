#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "medground/audit/server.hpp"
#include "medground/cli/pipeline.hpp"

using namespace medground;

namespace {

enum Exit { kOk = 0, kDataError = 1, kUsageError = 2 };

struct Options {
  std::string config;
  std::string manifest;
  std::string output_dir;
  std::string backend_config;
  std::optional<std::uint64_t> seed;
  std::optional<int> concurrency;
  std::optional<double> tau;
  std::string matching;

  std::string split;
  std::string predictions;
  std::string triplets;
  std::vector<std::string> annotators;
  std::string votes;
  std::string export_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string ui_dir;
};

PipelineConfig resolve(const Options& o) {
  PipelineConfig c;
  if (!o.config.empty()) c = validate_config(o.config);
  if (!o.manifest.empty()) c.manifest = o.manifest;
  if (!o.output_dir.empty()) c.output_dir = o.output_dir;
  if (!o.backend_config.empty()) c.backend_config = o.backend_config;
  if (o.seed) c.seed = *o.seed;
  if (o.concurrency) c.concurrency = *o.concurrency;
  if (o.tau) c.tau = *o.tau;
  if (!o.matching.empty()) {
    auto p = parse_match_policy(o.matching);
    if (!p) throw ConfigError("--matching must be optimal or greedy");
    c.matching = *p;
  }
  check_config(c, o.config.empty() ? "<flags>" : o.config);
  return c;
}

fs::path or_default(const std::string& flag, const fs::path& fallback) {
  return flag.empty() ? fallback : fs::path(flag);
}

AuditSession open_session(const Options& o, const PipelineConfig& c) {
  return AuditSession::from_file(or_default(o.triplets, c.out(files::kTriplets)).string(), o.annotators,
                                 or_default(o.votes, c.out(files::kVotes)).string());
}

int emit(StepSummary s) {
  const int code = s.record_errors > 0 ? kDataError : kOk;
  s.body["status"] = code == kOk ? "ok" : "data_error";
  std::cout << s.body.dump() << std::endl;
  return code;
}

int fail(const std::string& command, int code, const std::string& message) {
  std::cerr << "error: " << message << "\n";
  Json j = {{"command", command},
            {"status", code == kDataError ? "data_error" : "config_error"},
            {"error", message}};
  std::cout << j.dump() << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"medground: mask-grounded referring-query pipeline"};
  app.require_subcommand(1);
  Options o;
  app.add_option("-c,--config", o.config, "pipeline config file");
  app.add_option("--manifest", o.manifest, "override manifest path");
  app.add_option("-o,--output-dir", o.output_dir, "override output directory");
  app.add_option("--backend-config", o.backend_config, "override backend config path");
  app.add_option("--seed", o.seed, "override seed");
  app.add_option("--concurrency", o.concurrency, "override worker count");
  app.add_option("--tau", o.tau, "IoU threshold for semantic sensitivity");
  app.add_option("--matching", o.matching, "box matching policy: optimal | greedy");

  auto* extract = app.add_subcommand("extract", "manifest -> candidate pools");
  auto* synthesize = app.add_subcommand("synthesize", "pools -> draft triplets");
  auto* verify = app.add_subcommand("verify", "drafts -> accepted triplets, ledger, rejections");
  auto* analyze = app.add_subcommand("analyze", "triplets -> semantic metrics");
  analyze->add_option("--split", o.split, "label every triplet with this split");
  auto* evaluate = app.add_subcommand("evaluate", "predictions + triplets -> grounding tables");
  evaluate->add_option("--predictions", o.predictions, "prediction JSONL {id, output}")->required();
  evaluate->add_option("--triplets", o.triplets, "triplet JSONL (default: output dir)");
  auto* serve = app.add_subcommand("audit-serve", "start the audit service");
  auto* exporter = app.add_subcommand("export", "audited session -> verified split");
  for (auto* sub : {serve, exporter}) {
    sub->add_option("--annotators", o.annotators, "exactly three annotator ids")
        ->delimiter(',')
        ->required();
    sub->add_option("--triplets", o.triplets, "triplet JSONL (default: output dir)");
    sub->add_option("--votes", o.votes, "vote log JSONL (default: output dir)");
  }
  serve->add_option("--host", o.host, "bind address");
  serve->add_option("--port", o.port, "port (0 picks a free one)");
  serve->add_option("--ui", o.ui_dir, "static audit UI bundle");
  exporter->add_option("--out", o.export_path, "verified JSONL (default: output dir)");
  auto* run = app.add_subcommand("run", "enabled stages in order");
  auto* validate = app.add_subcommand("validate", "check a config and print it normalized");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const PipelineConfig c = resolve(o);
    if (extract->parsed()) return emit(run_extract(c));
    if (synthesize->parsed()) return emit(run_synthesize(c, *backend_for(c)));
    if (verify->parsed()) return emit(run_verify(c, *backend_for(c)));
    if (analyze->parsed()) return emit(run_analyze(c, o.split));
    if (evaluate->parsed()) return emit(run_evaluate(c, o.predictions, o.triplets));
    if (run->parsed()) return emit(run_pipeline(c));
    if (validate->parsed()) {
      StepSummary s;
      s.body = {{"command", "validate"},
                {"manifest", c.manifest.string()},
                {"output_dir", c.output_dir.string()},
                {"backend_config", c.backend_config.string()},
                {"lexicon_dir", c.lexicons().string()},
                {"image_root", c.images().string()},
                {"seed", c.seed},
                {"stages", {c.run_extract, c.run_synthesize, c.run_verify, c.run_analyze}},
                {"concurrency", c.concurrency},
                {"max_targets", c.max_targets},
                {"queries_per_image", c.queries_per_image},
                {"min_component_pixels", c.min_component_pixels},
                {"connectivity", c.connectivity},
                {"tau", c.tau},
                {"matching", std::string(to_string(c.matching))}};
      return emit(s);
    }
    if (exporter->parsed()) {
      AuditSession session = open_session(o, c);
      auto out = session.export_verified();
      if (!out) return fail(command, kDataError, out.error().message);
      const fs::path dest = or_default(o.export_path, c.out(files::kVerified));
      if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
      write_file(dest.string(), *out);
      StepSummary s;
      const auto rep = session.audit_report();
      s.body = {{"command", "export"},
                {"triplets", session.size()},
                {"exported", static_cast<std::size_t>(std::count(out->begin(), out->end(), '\n'))},
                {"good_ratio", percent_2dp(rep.rows.back().good(), rep.rows.back().total)},
                {"output", dest.string()}};
      return emit(s);
    }
    if (serve->parsed()) {
      fs::create_directories(c.output_dir);
      AuditSession session = open_session(o, c);
      AuditServer server(session, {c.images(), o.ui_dir});
      const int port = server.bind(o.host, o.port);
      if (port <= 0) return fail(command, kUsageError, "cannot bind " + o.host + ":" + std::to_string(o.port));
      std::cout << Json{{"command", "audit-serve"}, {"status", "listening"}, {"host", o.host},
                        {"port", port}, {"triplets", session.size()}}
                       .dump()
                << std::endl;
      server.listen();
      return kOk;
    }
  } catch (const ConfigError& e) {
    return fail(command, kUsageError, e.what());
  } catch (const DataError& e) {
    return fail(command, kDataError, e.what());
  } catch (const BackendError& e) {
    return fail(command, kDataError, e.what());
  } catch (const std::exception& e) {
    return fail(command, kDataError, e.what());
  }
  return kUsageError;
}

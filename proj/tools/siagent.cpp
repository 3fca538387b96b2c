#include <fmt/format.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <fstream>
#include <iostream>

#include "siagent/core/error.hpp"
#include "siagent/core/paths.hpp"
#include "siagent/core/text.hpp"
#include "siagent/harness/batch.hpp"
#include "siagent/llm/http_backend.hpp"
#include "siagent/llm/mock.hpp"
#include "siagent/scene/scene.hpp"
#include "siagent/service/ingest.hpp"
#include "siagent/service/pipeline.hpp"
#include "siagent/telemetry/session_file.hpp"
#include "siagent/telemetry/synthesize.hpp"
#include "siagent/service/server.hpp"

#include <CLI11.hpp>

using namespace siagent;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;

struct BenchArgs {
    std::string catalog;
    std::string backend = "mock";
    std::uint64_t seed = 1;
    std::string channels = "full";
    std::size_t parallel = 1;
    std::string descriptions = "templated";
    std::string planner = "llm";
    std::string json_out;
    std::string report_out;
};

void add_bench_options(CLI::App* cmd, BenchArgs& a) {
    cmd->add_option("catalog", a.catalog, "Catalog name (tasks60, ambiguous21) or path")->required();
    cmd->add_option("--backend", a.backend, "mock, mock:<script> or a profile id from backends.json");
    cmd->add_option("--seed", a.seed, "Jitter seed");
    cmd->add_option("--parallel", a.parallel, "Trials run at once");
    cmd->add_option("--descriptions", a.descriptions, "templated or llm");
    cmd->add_option("--planner", a.planner, "llm (through the backend) or rules");
    cmd->add_option("--json", a.json_out, "Write per-trial records here");
    cmd->add_option("--out", a.report_out, "Write the report here as well");
}

harness::HarnessConfig config_from(const BenchArgs& a) {
    harness::HarnessConfig cfg;
    cfg.seed = a.seed;
    cfg.channels = intent::parse_channels(a.channels);
    cfg.parallelism = a.parallel;
    if (a.descriptions == "llm")
        cfg.descriptions = translator::DescriptionMode::Llm;
    else if (a.descriptions != "templated")
        throw ConfigError("--descriptions must be templated or llm");
    if (a.planner != "llm" && a.planner != "rules") throw ConfigError("--planner must be llm or rules");
    cfg.llm_planner = a.planner == "llm";
    return cfg;
}

std::shared_ptr<llm::Backend> backend_for(const BenchArgs& a, const harness::Catalog& c) {
    return llm::make_backend(a.backend, harness::default_mock_script(c.name));
}

void write_text(const std::string& path, const std::string& content) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << content;
}

std::string channels_label(const std::set<intent::Channel>& ch) {
    std::vector<std::string> names;
    for (auto c : ch) names.emplace_back(intent::to_string(c));
    return text::join(names, "+");
}

int bench(const BenchArgs& a) {
    auto catalog = harness::load_named_catalog(a.catalog);
    auto cfg = config_from(a);
    auto backend = backend_for(a, catalog);
    auto results = harness::run_batch(catalog.tasks, cfg, *backend);
    auto m = harness::compute_metrics(results);
    auto report = harness::format_report(m, backend->id());
    report += fmt::format("catalog {} | channels {} | seed {} | planner {}\n", catalog.name, channels_label(cfg.channels),
                          cfg.seed, a.planner);
    if (a.backend.rfind("mock", 0) != 0)
        report += fmt::format("reference: 1st {:.1f}% top-3 {:.1f}% top-6 {:.1f}% API call time {:.1f}s\n",
                              harness::kReferenceCloudTasks.top1, harness::kReferenceCloudTasks.top3,
                              harness::kReferenceCloudTasks.top6, harness::kReferenceCloudLatencyS);
    std::cout << report;
    write_text(a.report_out, report);
    write_text(a.json_out, harness::format_records(results, m));
    return 0;
}

int ablate(const BenchArgs& a) {
    auto catalog = harness::load_named_catalog(a.catalog);
    auto cfg = config_from(a);
    auto backend = backend_for(a, catalog);
    cfg.channels = intent::kAllChannels;
    auto full = harness::run_batch(catalog.tasks, cfg, *backend);
    cfg.channels = {intent::Channel::Gaze};
    auto gaze = harness::run_batch(catalog.tasks, cfg, *backend);
    auto report = fmt::format("ablation on {} with {}\n", catalog.name, backend->id()) +
                  harness::format_ablation(harness::ablation_report(full, gaze));
    std::cout << report;
    write_text(a.report_out, report);
    return 0;
}

int scene_validate(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::string body((std::istreambuf_iterator<char>(in)), {});
    auto issues = scene::validate_scene_text(body);
    for (const auto& i : issues) std::cerr << path << ":" << i.line << ": " << i.message << "\n";
    if (!issues.empty()) return kExitConfig;
    std::cout << path << ": ok\n";
    return 0;
}

int mock_synth(const std::string& catalog_name, const std::string& out, std::uint64_t seed) {
    auto c = harness::load_named_catalog(catalog_name);
    harness::SynthOptions o;
    o.seed = seed;
    auto entries = harness::synthesize_mock_script(c, o);
    auto path = out.empty() ? harness::default_mock_script(c.name) : std::filesystem::path(out);
    llm::save_script(entries, path);
    std::cout << "wrote " << entries.size() << " entries to " << path.string() << "\n";
    return 0;
}

int mock_record(const BenchArgs& a, const std::string& out) {
    auto catalog = harness::load_named_catalog(a.catalog);
    auto cfg = config_from(a);
    auto recorder = std::make_shared<llm::RecordingBackend>(backend_for(a, catalog));
    auto results = harness::run_batch(catalog.tasks, cfg, *recorder);
    llm::save_script(recorder->entries(), out);
    std::cout << harness::format_report(harness::compute_metrics(results), recorder->id());
    std::cout << "recorded " << recorder->entries().size() << " calls to " << out << "\n";
    return 0;
}

int replay(const std::string& session_path, const std::string& scene_id, const std::string& backend_spec,
           const std::string& channels, const std::string& choice) {
    auto backend = llm::make_backend(backend_spec, data_dir() / "mock" / "sessions.jsonl");
    service::PipelineOptions opts;
    opts.channels = intent::parse_channels(channels);
    auto out = service::replay_session_file(session_path, scene_id, *backend, opts, choice);
    std::cout << service::format_replay(out);
    return out.stage == service::Stage::Done ? 0 : kExitPipeline;
}

int demo(const std::string& template_id, const std::string& scene_id, std::uint64_t seed, const std::string& out) {
    auto scene = scene::load_fixture_scene(scene_id);
    auto window = telemetry::synthesize_demo(telemetry::resolve_template(template_id, scene), scene, seed);
    telemetry::record_windows({window}, out, scene_id, llm::wall_clock_ms());
    std::cout << "wrote " << window.size() << " frames to " << out << "\n";
    return 0;
}

int send(const std::string& session_path, const std::string& host, int port, double rate_hz) {
    auto log = telemetry::load_session(session_path);
    auto names = service::name_table_for(scene::load_fixture_scene(log.scene_id));
    int fd = ::socket(AF_INET, SOCK_DGRAM, 0);
    if (fd < 0) throw IoError("cannot create udp socket");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) throw ConfigError("bad host " + host);
    auto put = [&](const std::vector<std::uint8_t>& b) {
        ::sendto(fd, b.data(), b.size(), 0, reinterpret_cast<const sockaddr*>(&addr), sizeof addr);
    };
    put(service::encode_announce(names));
    SteadyClock clock;
    for (const auto& f : log.frames) {
        put(service::encode_frame(f, names));
        if (rate_hz > 0) clock.sleep_ms(1000.0 / rate_hz);
    }
    ::close(fd);
    std::cout << "sent " << log.frames.size() << " frames to " << host << ":" << port << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"siagent: eye-hand demonstration to agent operation pipeline"};
    app.require_subcommand(1);

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("bench", "Run a task catalog and print metrics");
    add_bench_options(bench_cmd, bench_args);
    bench_cmd->add_option("--channels", bench_args.channels, "full, gaze or a comma list");

    BenchArgs ablate_args;
    auto* ablate_cmd = app.add_subcommand("ablate", "Compare gaze-only with full channels");
    add_bench_options(ablate_cmd, ablate_args);

    auto* scene_cmd = app.add_subcommand("scene", "Scene file tools");
    scene_cmd->require_subcommand(1);
    std::string scene_path;
    auto* validate_cmd = scene_cmd->add_subcommand("validate", "Check a scene file");
    validate_cmd->add_option("file", scene_path)->required();

    auto* mock_cmd = app.add_subcommand("mock", "Scripted backend tools");
    mock_cmd->require_subcommand(1);
    std::string synth_catalog, synth_out;
    std::uint64_t synth_seed = 1;
    auto* synth_cmd = mock_cmd->add_subcommand("synth", "Generate the scripted answers for a catalog");
    synth_cmd->add_option("catalog", synth_catalog)->required();
    synth_cmd->add_option("--out", synth_out);
    synth_cmd->add_option("--seed", synth_seed);
    BenchArgs record_args;
    std::string record_out;
    auto* record_cmd = mock_cmd->add_subcommand("record", "Run a catalog against a live backend and keep every call");
    add_bench_options(record_cmd, record_args);
    record_cmd->add_option("--script", record_out, "Script file to write")->required();
    BenchArgs play_args;
    std::string play_script;
    auto* play_cmd = mock_cmd->add_subcommand("play", "Run a catalog against a recorded script");
    play_cmd->add_option("script", play_script)->required();
    add_bench_options(play_cmd, play_args);

    std::string replay_path, replay_scene, replay_backend = "mock", replay_channels = "full",
                replay_choice = "1";
    auto* replay_cmd = app.add_subcommand("replay", "Run the pipeline over a recorded session file");
    replay_cmd->add_option("session", replay_path)->required();
    replay_cmd->add_option("--scene", replay_scene, "Scene fixture id, defaults to the one in the file");
    replay_cmd->add_option("--backend", replay_backend);
    replay_cmd->add_option("--channels", replay_channels);
    replay_cmd->add_option("--choice", replay_choice, "Confirmation input: a rank, more, none");

    service::ServerOptions serve_opts;
    auto* serve_cmd = app.add_subcommand("serve", "Start datagram ingestion and the session API");
    serve_cmd->add_option("--host", serve_opts.host);
    serve_cmd->add_option("--port", serve_opts.http_port);
    serve_cmd->add_option("--udp-port", serve_opts.udp_port);
    serve_cmd->add_option("--root", serve_opts.root, "Directory for persisted sessions");
    serve_cmd->add_option("--backend", serve_opts.backend);
    serve_cmd->add_option("--scene", serve_opts.scene_id);

    std::string demo_template, demo_scene = "study_room", demo_out;
    std::uint64_t demo_seed = 1;
    auto* demo_cmd = app.add_subcommand("demo", "Synthesize a demonstration from a motion template into a session file");
    demo_cmd->add_option("template", demo_template, "archetype@Object[+Object]")->required();
    demo_cmd->add_option("--scene", demo_scene);
    demo_cmd->add_option("--seed", demo_seed);
    demo_cmd->add_option("--out", demo_out)->required();

    std::string send_path, send_host = "127.0.0.1";
    int send_port = 9870;
    double send_rate = 30.0;
    auto* send_cmd = app.add_subcommand("send", "Stream a session file as telemetry datagrams");
    send_cmd->add_option("session", send_path)->required();
    send_cmd->add_option("--host", send_host);
    send_cmd->add_option("--port", send_port);
    send_cmd->add_option("--rate", send_rate, "Frames per second, 0 for as fast as possible");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*bench_cmd) return bench(bench_args);
        if (*ablate_cmd) return ablate(ablate_args);
        if (*validate_cmd) return scene_validate(scene_path);
        if (*synth_cmd) return mock_synth(synth_catalog, synth_out, synth_seed);
        if (*record_cmd) return mock_record(record_args, record_out);
        if (*play_cmd) {
            play_args.backend = "mock:" + play_script;
            return bench(play_args);
        }
        if (*replay_cmd) return replay(replay_path, replay_scene, replay_backend, replay_channels, replay_choice);
        if (*serve_cmd) return service::run_server(serve_opts);
        if (*demo_cmd) return demo(demo_template, demo_scene, demo_seed, demo_out);
        if (*send_cmd) return send(send_path, send_host, send_port, send_rate);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == ErrorKind::ConfigError || e.kind() == ErrorKind::ParseError ? kExitConfig : kExitPipeline;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    }
    return 0;
}

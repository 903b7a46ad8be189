#include <doctest.h>

#include <fstream>
#include <sstream>

#include "hullinv/cli.hpp"
#include "hullinv/config.hpp"
#include "hullinv/evaluator.hpp"
#include "test_util.hpp"

using namespace hullinv;

namespace {

struct Run {
  int code;
  std::string out, err;
};

eval::EvalReport read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  return eval::parse_report_csv(in, path.string());
}

void drop(std::vector<std::pair<std::string, std::string>>& tree, const std::string& name) {
  std::erase_if(tree, [&](const auto& e) { return e.first == name; });
}

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

// A 10-sample 32x32 set shared by the slower cases below.
const std::filesystem::path& shared_data() {
  static const auto dir = [] {
    const auto d = testutil::scratch_dir("cli_shared") / "data";
    const auto r = run({"gen-data", "--count", "10", "--seed", "3", "--height", "32", "--width", "32",
                        "--out", d.string()});
    REQUIRE(r.code == 0);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("key = value parsing") {
  std::istringstream in("# comment\n\nalpha = 1.5\nname=  two words  \ncount = 12\n");
  const auto kv = config::parse(in, "mem");
  CHECK(kv.get_double("alpha") == 1.5);
  CHECK(kv.at("name") == "two words");
  CHECK(kv.get_int("count") == 12);
  CHECK_FALSE(kv.get("missing").has_value());
  CHECK_THROWS(kv.at("missing"));
  CHECK_THROWS(kv.get_int("alpha"));

  std::ostringstream out;
  config::write(out, kv);
  std::istringstream back(out.str());
  const auto kv2 = config::parse(back);
  CHECK(kv2.items() == kv.items());

  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17}) {
    CHECK(std::stod(config::format_double(v)) == v);
  }

  std::istringstream bad("a = 1\nno equals sign\n");
  try {
    config::parse(bad, "file.cfg");
    FAIL("expected parse error");
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("file.cfg") != std::string::npos);
    CHECK(msg.find('2') != std::string::npos);
  }
  std::istringstream empty_key(" = 3\n");
  CHECK_THROWS(config::parse(empty_key));
}

}  // TEST_SUITE

TEST_SUITE("cli") {

TEST_CASE("gen-data is reproducible and validates flags") {
  const auto dir = testutil::scratch_dir("cli_gen");
  const std::vector<std::string> base{"gen-data", "--count", "6", "--seed", "9", "--height", "32", "--width", "32"};
  auto a = base, b = base;
  a.insert(a.end(), {"--out", (dir / "a").string()});
  b.insert(b.end(), {"--out", (dir / "b").string(), "--workers", "2"});
  REQUIRE(run(a).code == 0);
  REQUIRE(run(b).code == 0);
  auto ta = testutil::tree_bytes(dir / "a"), tb = testutil::tree_bytes(dir / "b");
  // The recorded effective config names the worker count; everything else matches.
  drop(ta, "gen-data.config");
  drop(tb, "gen-data.config");
  CHECK(ta == tb);
  CHECK(ta.size() > 10u);

  CHECK(run(a).code == 1);  // refuses to clobber
  a.push_back("--overwrite");
  CHECK(run(a).code == 0);

  CHECK(run({"gen-data", "--seed", "1", "--out", (dir / "c").string()}).code == 2);
  CHECK(run({"gen-data", "--count", "6", "--seed", "1", "--case", "case3", "--out", (dir / "c").string()}).code == 2);
  CHECK(run({"gen-data", "--count", "6", "--seed", "1", "--split", "0.5,0.5,0.5", "--out", (dir / "c").string()}).code == 2);
  CHECK(run({"no-such-command"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("config files: unknown keys rejected, flags win") {
  const auto dir = testutil::scratch_dir("cli_cfg");
  std::ofstream(dir / "bad.cfg") << "count = 6\nseed = 1\nbogus = 2\n";
  const auto bad = run({"gen-data", "--config", (dir / "bad.cfg").string(), "--out", (dir / "x").string()});
  CHECK(bad.code == 2);
  CHECK(bad.err.find("bogus") != std::string::npos);

  std::ofstream(dir / "good.cfg") << "count = 6\nseed = 1\nheight = 32\nwidth = 32\n";
  REQUIRE(run({"gen-data", "--config", (dir / "good.cfg").string(), "--seed", "5", "--out", (dir / "y").string()}).code == 0);
  const auto eff = config::read_file(dir / "y" / "gen-data.config");
  CHECK(eff.at("seed") == "5");
  CHECK(eff.at("count") == "6");

  // Feeding the recorded config back reproduces the same dataset.
  REQUIRE(run({"gen-data", "--config", (dir / "y" / "gen-data.config").string(), "--out", (dir / "z").string()}).code == 0);
  auto ty = testutil::tree_bytes(dir / "y"), tz = testutil::tree_bytes(dir / "z");
  drop(ty, "gen-data.config");  // records its own --out
  drop(tz, "gen-data.config");
  CHECK(ty == tz);
}

TEST_CASE("roundtrip") {
  const auto dir = testutil::scratch_dir("cli_rt");
  const auto r = run({"roundtrip", "--baseline", "--format", "csv"});
  REQUIRE(r.code == 0);
  std::istringstream in(r.out);
  const auto rep = eval::parse_report_csv(in);
  REQUIRE(rep.rows.size() == 1u);
  CHECK(rep.rows[0].sections.size() == 14u);
  CHECK(rep.rows[0].total <= 5.0);

  std::ofstream(dir / "bad.off") << "section 0 3\n0 0\n1 1\nnot a number\n";
  const auto bad = run({"roundtrip", "--offsets", (dir / "bad.off").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("bad.off:4:") != std::string::npos);

  CHECK(run({"roundtrip"}).code == 2);
  CHECK(run({"roundtrip", "--baseline", "--data", dir.string()}).code == 2);
}

TEST_CASE("train, eval and gradcam on a small set") {
  const auto& data = shared_data();
  const auto dir = testutil::scratch_dir("cli_train");
  const auto r = run({"train", "--data", data.string(), "--out", (dir / "run").string(), "--variant", "mt-conv0fc3",
                      "--width", "0.125", "--epochs", "50", "--patience", "50", "--seed", "2"});
  REQUIRE(r.code == 0);
  for (const char* f : {"best.ckpt", "last.ckpt", "loss.csv", "config.txt", "normalization.txt"}) {
    CHECK(std::filesystem::exists(dir / "run" / f));
  }

  const auto ev = run({"eval", "--checkpoint", (dir / "run" / "best.ckpt").string(), "--data", data.string(),
                       "--protocol", "offset", "--out", (dir / "eval").string()});
  REQUIRE(ev.code == 0);
  std::ifstream csv(dir / "eval" / "offset.csv");
  std::string header, row;
  std::getline(csv, header);
  std::getline(csv, row);
  CHECK(std::count(row.begin(), row.end(), ',') == 15);  // name plus 14 sections plus Total
  const auto rep = read_csv(dir / "eval" / "offset.csv");
  REQUIRE(rep.rows.size() == 1u);
  CHECK(rep.rows[0].name == "mt-conv0fc3");

  const auto gc = run({"gradcam", "--checkpoint", (dir / "run" / "best.ckpt").string(), "--data", data.string(),
                       "--sample", "0", "--all-tasks", "--out", (dir / "cam").string()});
  REQUIRE(gc.code == 0);
  int overlays = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "cam")) overlays += e.path().extension() == ".pgm";
  CHECK(overlays == 14);
  CHECK(run({"gradcam", "--checkpoint", (dir / "run" / "best.ckpt").string(), "--data", data.string(),
             "--sample", "0", "--task", "14", "--out", (dir / "cam2").string()}).code == 1);

  CHECK(run({"eval", "--data", data.string(), "--out", (dir / "e2").string()}).code == 2);
  const auto missing = run({"train", "--data", (dir / "nope").string(), "--out", (dir / "r2").string()});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error [") != std::string::npos);
}

TEST_CASE("resumed training writes the same bytes as an uninterrupted run") {
  const auto& data = shared_data();
  const auto dir = testutil::scratch_dir("cli_resume");
  const std::vector<std::string> common{"train", "--data", data.string(), "--width", "0.0625", "--seed", "4",
                                        "--lr", "0.001"};
  auto full = common, part = common;
  full.insert(full.end(), {"--epochs", "3", "--out", (dir / "full").string()});
  part.insert(part.end(), {"--epochs", "1", "--out", (dir / "part").string()});
  REQUIRE(run(full).code == 0);
  REQUIRE(run(part).code == 0);
  auto resume = common;
  resume.insert(resume.end(), {"--epochs", "3", "--out", (dir / "resumed").string(), "--resume",
                               (dir / "part" / "last.ckpt").string()});
  REQUIRE(run(resume).code == 0);
  for (const char* f : {"last.ckpt", "best.ckpt", "loss.csv"}) {
    CHECK(testutil::slurp(dir / "full" / f) == testutil::slurp(dir / "resumed" / f));
  }
}

TEST_CASE("report merges CSV inputs in order") {
  const auto dir = testutil::scratch_dir("cli_report");
  eval::EvalReport a, b;
  a.rows.push_back({"first", std::vector<double>(14, 1.0), 1.0});
  b.rows.push_back({"second", std::vector<double>(14, 2.0), 2.0});
  eval::emit_report(dir / "a.csv", a, eval::Format::kCsv);
  eval::emit_report(dir / "b.csv", b, eval::Format::kCsv);
  const auto r = run({"report", (dir / "a.csv").string(), (dir / "b.csv").string(), "--title", "Merged",
                      "--csv-out", (dir / "m.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("Merged") != std::string::npos);
  CHECK(r.out.find("| first |") < r.out.find("| second |"));
  const auto m = read_csv(dir / "m.csv");
  REQUIRE(m.rows.size() == 2u);
  CHECK(m.rows[1].name == "second");
}

}  // TEST_SUITE

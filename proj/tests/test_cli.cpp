#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "coulvil/cli.hpp"
#include "coulvil/serialize.hpp"

using namespace coulvil;

namespace {
std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}
}  // namespace

TEST_CASE("verify subcommand passes and is byte-stable") {
  std::string out1 = "/tmp/coulvil_verify_1.json";
  std::string out2 = "/tmp/coulvil_verify_2.json";
  CHECK(cli_run({"verify", "--n", "1", "--bc", "free", "--out", out1}) == 0);
  CHECK(cli_run({"verify", "--n", "1", "--bc", "free", "--out", out2}) == 0);
  std::string a = slurp(out1), b = slurp(out2);
  CHECK(a == b);
  auto j = nlohmann::json::parse(a);
  CHECK(j.at("pass").get<bool>());
  bool has_vil = false, has_iv = false, has_power = false;
  for (const auto& c : j.at("checks")) {
    std::string name = c.at("check").get<std::string>();
    if (name.find("Z_vil = Z_gff * Z_coul") != std::string::npos) has_vil = true;
    if (name.find("Z_iv = Z_gff * Z_coul") != std::string::npos) has_iv = true;
    if (name.find("beta-power") != std::string::npos) has_power = true;
    CHECK(c.at("pass").get<bool>());
  }
  CHECK(has_vil);
  CHECK(has_iv);
  CHECK(has_power);
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("ig table emits the expected columns") {
  std::string out = "/tmp/coulvil_ig.csv";
  CHECK(cli_run({"ig", "--beta", "0.5", "--table", "--out", out}) == 0);
  std::string csv = slurp(out);
  CHECK(csv.rfind("a,mu,var,third_abs,M_beta,jacobi_residual", 0) == 0);
  int lines = 0;
  for (char ch : csv)
    if (ch == '\n') ++lines;
  CHECK(lines == 12);  // header + 11 grid rows
  std::remove(out.c_str());
}

TEST_CASE("sample subcommand is reproducible and hash-stamped") {
  std::string out1 = "/tmp/coulvil_s1.json", out2 = "/tmp/coulvil_s2.json";
  std::vector<std::string> args = {"sample", "--model", "coulomb", "--n",    "1",
                                   "--beta", "0.7",     "--seed",  "5",      "--samples",
                                   "20",     "--burnin", "50",     "--out",  out1};
  CHECK(cli_run(args) == 0);
  args.back() = out2;
  CHECK(cli_run(args) == 0);
  CHECK(slurp(out1) == slurp(out2));

  auto j = nlohmann::json::parse(slurp(out1));
  auto g = build_lattice(1, BoundaryCondition::Free);
  CHECK(j.at("geometry_hash").get<std::string>() == hash_hex(g.hash));
  CHECK(j.at("samples").size() == 20);
  // q is rooted at the outer face
  for (const auto& s : j.at("samples")) CHECK(s.at(g.root_face).get<int64_t>() == 0);
  std::remove(out1.c_str());
  std::remove(out2.c_str());
}

TEST_CASE("green subcommand") {
  std::string out = "/tmp/coulvil_green.csv";
  CHECK(cli_run({"green", "--n", "8", "--bc", "zero", "--out", out}) == 0);
  std::string csv = slurp(out);
  CHECK(csv.rfind("n,G00,", 0) == 0);
  std::remove(out.c_str());
}

TEST_CASE("bad arguments fail loudly") {
  CHECK(cli_run({"measure", "--observable", "no-such-thing", "--n", "1"}) != 0);
  CHECK(cli_run({"frobnicate"}) != 0);
  CHECK(cli_run({"sample", "--model", "bogus"}) != 0);
  CHECK(cli_run({"green", "--n", "0"}) != 0);
}

TEST_CASE("config file supplies defaults, flags override") {
  std::string cfgpath = "/tmp/coulvil_cfg.toml";
  {
    std::ofstream out(cfgpath);
    out << "[green]\nbeta=0.5\nn=8\n";
  }
  std::string out = "/tmp/coulvil_green_cfg.csv";
  CHECK(cli_run({"green", "--config", cfgpath, "--bc", "zero", "--out", out}) == 0);
  std::string csv = slurp(out);
  CHECK(csv.find("\n8,") != std::string::npos);
  std::remove(out.c_str());
  std::remove(cfgpath.c_str());
}

TEST_CASE("geometry dump and form round trip") {
  std::string out = "/tmp/coulvil_geom.json";
  CHECK(cli_run({"geometry", "--n", "1", "--bc", "zero", "--out", out}) == 0);
  auto j = nlohmann::json::parse(slurp(out));
  CHECK(j.at("counts") == nlohmann::json({10, 20, 12}));
  CHECK(j.at("bc") == "zero");
  std::remove(out.c_str());

  auto g = build_lattice(1, BoundaryCondition::Zero);
  CHECK(hash_hex(g.hash) == j.at("hash").get<std::string>());

  Form f(g, 0);
  f[1] = 0.5;
  f[2] = -1.25;
  Form f2 = form_from_json(form_to_json(f), g);
  CHECK((f2.values - f.values).cwiseAbs().maxCoeff() == 0.0);

  IntForm m(g, 1);
  m[3] = -7;
  IntForm m2 = int_form_from_json(form_to_json(m), g);
  CHECK((m2.values - m.values).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("measure two-point smoke") {
  std::string out = "/tmp/coulvil_tp.json";
  CHECK(cli_run({"measure", "--observable", "two-point", "--n", "2", "--beta", "1", "--x1", "-1",
                 "--y1", "0", "--x2", "1", "--y2", "0", "--samples", "2000", "--burnin", "200",
                 "--seed", "3", "--out", out}) == 0);
  auto j = nlohmann::json::parse(slurp(out));
  double direct = j.at("direct").at("estimate").get<double>();
  CHECK(direct > 0.0);
  CHECK(direct <= 1.0);
  CHECK(j.at("direct").at("geometry_hash").get<std::string>().size() == 16);
  std::remove(out.c_str());
}

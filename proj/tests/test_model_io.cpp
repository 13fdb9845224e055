#include <gtest/gtest.h>

#include <filesystem>

#include "dtdl/model_io.hpp"
#include "oracles.hpp"

using namespace dtdl;

namespace {

DtdlModel random_model(std::uint64_t seed) {
  Rng rng(seed);
  DtdlModel m;
  m.hyper.m = 3;
  m.hyper.omega = 6;
  m.hyper.N_i = 2;
  m.hyper.lambda1 = 0.1 + rng.uniform();
  m.hyper.smoothness = SmoothnessMode::Penalty;
  m.lstm = LstmAeParams::initialize(3, rng.split("p"), 0.8);
  m.lstm.readout_v = oracle::random_matrix(3, 1, rng).col(0);
  m.lstm.readout_c = rng.normal();
  m.dictionary = Dictionary(oracle::random_matrix(3, 4, rng), {2, 2});
  m.scaler.scale = 1234.5678901234567;
  m.device_names = {"fridge", "kettle"};
  m.status = "converged";
  return m;
}

std::filesystem::path temp_file(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "dtdl_model_io";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST(ModelIo, DtdlRoundTripIsBitExact) {
  const DtdlModel m = random_model(11);
  const auto path = temp_file("model.json");
  save_model(path, m);
  const DtdlModel r = load_model(path);
  EXPECT_EQ(r.lstm.flatten(), m.lstm.flatten());
  EXPECT_EQ(r.dictionary.D, m.dictionary.D);
  EXPECT_EQ(r.dictionary.per_device_atoms, m.dictionary.per_device_atoms);
  EXPECT_EQ(r.scaler.scale, m.scaler.scale);
  EXPECT_EQ(r.device_names, m.device_names);
  EXPECT_EQ(r.status, m.status);
  EXPECT_EQ(hyper_to_json(r.hyper), hyper_to_json(m.hyper));
  EXPECT_EQ(model_to_json(r).dump(), model_to_json(m).dump());
}

TEST(ModelIo, GateOrderIsRecorded) {
  const json j = model_to_json(random_model(1));
  EXPECT_EQ(j["lstm"]["gate_order"], json({"a", "i", "f", "o"}));
  EXPECT_EQ(j["kind"], "dtdl");
  EXPECT_EQ(j["version"], 1);
}

TEST(ModelIo, EnvelopeChecks) {
  json j = model_to_json(random_model(2));
  json wrong_kind = j;
  wrong_kind["kind"] = "cdl";
  EXPECT_THROW(model_from_json(wrong_kind), DataError);
  json wrong_version = j;
  wrong_version["version"] = 2;
  EXPECT_THROW(model_from_json(wrong_version), DataError);
  json short_w = j;
  short_w["lstm"]["W"].erase(0);
  EXPECT_THROW(model_from_json(short_w), DataError);
  json missing = j;
  missing.erase("scaler");
  EXPECT_THROW(model_from_json(missing), DataError);
  EXPECT_THROW(load_model(temp_file("does_not_exist.json")), DataError);
}

TEST(HyperJson, RoundTripAndUnknownKeys) {
  HyperParams h;
  h.lambda4 = 1e-4;
  h.omega = 9;
  h.smoothness = SmoothnessMode::Penalty;
  h.admm.rho = 2.5;
  const HyperParams r = hyper_from_json(hyper_to_json(h));
  EXPECT_EQ(hyper_to_json(r), hyper_to_json(h));
  EXPECT_THROW(hyper_from_json(json{{"lambda_1", 0.1}}), ConfigError);
  EXPECT_THROW(hyper_from_json(json{{"omega", "fourteen"}}), ConfigError);
  EXPECT_THROW(hyper_from_json(json{{"smoothness", "soft"}}), ConfigError);
  EXPECT_THROW(hyper_from_json(json::array()), ConfigError);
  // missing keys keep defaults
  EXPECT_EQ(hyper_from_json(json::object()).N_i, HyperParams{}.N_i);
}

TEST(ModelIo, BaselineRoundTrips) {
  Rng rng(5);
  CdlModel c;
  c.dict = Dictionary(oracle::random_matrix(5, 3, rng), {1, 2});
  c.scale = 987.125;
  c.lambda1 = 0.05;
  c.device_names = {"a", "b"};
  const CdlModel cr = cdl_from_json(cdl_to_json(c));
  EXPECT_EQ(cr.dict.D, c.dict.D);
  EXPECT_EQ(cr.dict.per_device_atoms, c.dict.per_device_atoms);
  EXPECT_EQ(cr.scale, c.scale);
  EXPECT_EQ(cr.device_names, c.device_names);

  SmpModel s;
  s.mean_snippet = {oracle::random_matrix(4, 1, rng).col(0), oracle::random_matrix(4, 1, rng).col(0)};
  s.on_fraction = {0.25, 0.75};
  s.device_names = {"a", "b"};
  const SmpModel sr = smp_from_json(smp_to_json(s));
  EXPECT_EQ(sr.mean_snippet[1], s.mean_snippet[1]);
  EXPECT_EQ(sr.on_fraction, s.on_fraction);

  EXPECT_THROW(smp_from_json(cdl_to_json(c)), DataError);
  EXPECT_THROW(cdl_from_json(smp_to_json(s)), DataError);
}

TEST(ModelIo, TrainingLogCsv) {
  TrainingLogEntry e;
  e.iter = 3;
  e.terms.J = 1.5;
  e.dict_delta = 0.25;
  const std::string csv = training_log_csv({e});
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iter,J,J1,J2,J3,J4,smoothness_residual,dict_delta");
  EXPECT_NE(csv.find("\n3,1.5,"), std::string::npos);
  EXPECT_EQ(csv.back(), '\n');
}

TEST(ModelIo, ReportCsv) {
  const std::vector<Eigen::MatrixXd> est = {Eigen::MatrixXd::Constant(2, 2, 1.0), Eigen::MatrixXd::Constant(2, 2, 2.0)};
  const std::vector<std::vector<bool>> on = {{true, false}, {false, true}};
  const std::string plain = report_csv({"x", "y"}, est, on, 10);
  EXPECT_NE(plain.find("10,x,2,,1,\n"), std::string::npos);
  EXPECT_NE(plain.find("11,y,4,,1,\n"), std::string::npos);
  const std::string full = report_csv({"x", "y"}, est, on, 0, &est, &on);
  EXPECT_NE(full.find("0,y,4,4,0,0\n"), std::string::npos);
}

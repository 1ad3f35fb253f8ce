#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>

#include "bfln/bfln.h"

namespace fs = std::filesystem;

namespace {

const char* kTiny = R"({
  "clients": 4, "rounds": 2, "k_clusters": 2, "skew": 0.5,
  "train": {"batch_size": 8, "learning_rate": 0.05, "local_epochs": 1},
  "model": {"hidden_dims": [6, 4]}, "probe": {"psi": 4},
  "data": {"classes": 3, "dim": 4, "per_class": 40}
})";

}  // namespace

TEST(CApi, StatusStrings) {
  EXPECT_STREQ(bfln_status_string(BFLN_OK), "ok");
  EXPECT_STREQ(bfln_status_string(BFLN_CHAIN), "chain error");
}

TEST(CApi, NullArguments) {
  EXPECT_EQ(bfln_experiment_load(nullptr, nullptr), BFLN_INVALID_ARGUMENT);
  EXPECT_EQ(bfln_simulation_step(nullptr, nullptr), BFLN_INVALID_ARGUMENT);
  bfln_experiment_destroy(nullptr);
  bfln_simulation_destroy(nullptr);
}

TEST(CApi, MissingConfigIsConfigError) {
  bfln_experiment* e = nullptr;
  EXPECT_EQ(bfln_experiment_load("/nonexistent/cfg.json", &e), BFLN_CONFIG);
  EXPECT_EQ(e, nullptr);
  EXPECT_NE(std::string(bfln_last_error()).find("cfg.json"), std::string::npos);
}

TEST(CApi, BadFieldIsConfigError) {
  bfln_simulation* s = nullptr;
  EXPECT_EQ(bfln_simulation_create(R"({"clients": "many"})", &s), BFLN_CONFIG);
  EXPECT_NE(std::string(bfln_last_error()).find("clients"), std::string::npos);
}

TEST(CApi, SimulationStepping) {
  bfln_simulation* s = nullptr;
  ASSERT_EQ(bfln_simulation_create(kTiny, &s), BFLN_OK) << bfln_last_error();
  EXPECT_EQ(bfln_simulation_clients(s), 4u);
  size_t clusters[4];
  EXPECT_EQ(bfln_simulation_clusters(s, clusters, 4), BFLN_INVALID_ARGUMENT);
  double acc = -1;
  ASSERT_EQ(bfln_simulation_step(s, &acc), BFLN_OK) << bfln_last_error();
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  ASSERT_EQ(bfln_simulation_step(s, &acc), BFLN_OK);
  EXPECT_EQ(bfln_simulation_step(s, &acc), BFLN_CONFIG);
  EXPECT_EQ(bfln_simulation_rounds_completed(s), 2u);
  EXPECT_EQ(bfln_simulation_clusters(s, clusters, 4), BFLN_OK);
  size_t height = 0;
  EXPECT_EQ(bfln_simulation_chain_height(s, &height), BFLN_OK);
  EXPECT_EQ(height, 3u);
  double err = 1;
  EXPECT_EQ(bfln_simulation_conservation_error(s, &err), BFLN_OK);
  EXPECT_LT(err, 1e-9);
  double bal[4];
  EXPECT_EQ(bfln_simulation_balances(s, bal, 4), BFLN_OK);
  double total = bal[0] + bal[1] + bal[2] + bal[3];
  EXPECT_NEAR(total, 4 * 5.0 + 2 * 20.0, 1e-9);

  const auto path = fs::temp_directory_path() / "bfln_capi_chain.ndjson";
  ASSERT_EQ(bfln_simulation_export_chain(s, path.c_str()), BFLN_OK);
  size_t blocks = 0;
  int64_t failing = 0;
  EXPECT_EQ(bfln_verify_chain(path.c_str(), &blocks, &failing), BFLN_OK);
  EXPECT_EQ(blocks, 3u);
  EXPECT_EQ(failing, -1);
  bfln_simulation_destroy(s);
}

TEST(CApi, Incentive) {
  size_t sizes[] = {12, 8};
  double kappa, alloc[2], per[2], fee;
  ASSERT_EQ(bfln_incentive(sizes, 2, 20, 2, 20, &kappa, alloc, per, &fee), BFLN_OK);
  EXPECT_NEAR(kappa, 20.0 / 208.0, 1e-15);
  EXPECT_NEAR(alloc[0] + alloc[1], 20.0, 1e-9);
  EXPECT_NEAR(per[0], 1.15385, 1e-5);
  EXPECT_NEAR(fee, kappa / 20, 1e-15);
  EXPECT_EQ(bfln_incentive(sizes, 2, 20, 0.5, 20, &kappa, alloc, per, &fee), BFLN_CONFIG);
}

TEST(CApi, PearsonAndHash) {
  double a[] = {1, 2, 3, 4}, b[] = {2, 1, 4, 3}, c[] = {5, 5, 5, 5}, r = 0;
  EXPECT_EQ(bfln_pearson(a, b, 4, &r), BFLN_OK);
  EXPECT_NEAR(r, 0.6, 1e-15);
  EXPECT_EQ(bfln_pearson(a, c, 4, &r), BFLN_VALIDATION);
  EXPECT_EQ(r, 0.0);
  uint8_t d[32];
  ASSERT_EQ(bfln_model_hash(nullptr, 0, d), BFLN_OK);
  EXPECT_EQ(d[0], 0xaf);
  EXPECT_EQ(d[31], 0xfc);
  double bad[] = {NAN};
  EXPECT_EQ(bfln_model_hash(bad, 1, d), BFLN_VALIDATION);
}

TEST(CApi, Gradcheck) {
  size_t hidden[] = {5, 4};
  double err = 1;
  ASSERT_EQ(bfln_gradcheck(3, hidden, 2, 3, 4, 7, &err), BFLN_OK);
  EXPECT_LT(err, 1e-4);
}

TEST(CApi, ExperimentRunAndSummarize) {
  const auto root = fs::temp_directory_path() / "bfln_capi_runs";
  fs::remove_all(root);
  bfln_experiment* e = nullptr;
  ASSERT_EQ(bfln_experiment_from_json(kTiny, &e), BFLN_OK) << bfln_last_error();
  ASSERT_EQ(bfln_experiment_set(e, "out", root.c_str()), BFLN_OK);
  ASSERT_EQ(bfln_experiment_set(e, "seeds", "0,1,2"), BFLN_OK);
  EXPECT_EQ(bfln_experiment_set(e, "k", "x"), BFLN_CONFIG);
  size_t n = 0;
  ASSERT_EQ(bfln_experiment_run_count(e, &n), BFLN_OK);
  EXPECT_EQ(n, 3u);
  ASSERT_EQ(bfln_experiment_run(e, 3), BFLN_OK) << bfln_last_error();
  EXPECT_STREQ(bfln_experiment_output_dir(e), root.c_str());
  bfln_experiment_destroy(e);
  EXPECT_EQ(bfln_summarize(root.c_str()), BFLN_OK);
  EXPECT_TRUE(fs::exists(root / "accuracy_grid.csv"));
  EXPECT_EQ(bfln_summarize("/nonexistent/dir"), BFLN_IO);
}

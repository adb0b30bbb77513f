#include <gtest/gtest.h>

#include <map>

#include "support/fixtures.hpp"
#include "support/http.hpp"
#include "support/oracles.hpp"
#include "support/schema.hpp"
#include "t3/api/server.hpp"

namespace t3 {
namespace {

using api::FilterSpec;
using api::parse_filter;
using json = nlohmann::json;
using testing::HttpClient;
using testing::url_encode;

const std::vector<std::string> kLabels{"sports", "politics", "tech"};

template <typename F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an error";
  return ErrorKind::kConfig;
}

// ---------------------------------------------------------------------------
// Filters

TEST(Filter, ParsesClassesAndRanges) {
  const FilterSpec f = parse_filter(R"({"labels":[0,"tech"],"loss":[0.1,2],"variability":[0,0.2]})", kLabels);
  EXPECT_EQ(*f.labels, (std::set<std::size_t>{0, 2}));
  EXPECT_FALSE(f.predictions.has_value());
  EXPECT_EQ(*f.loss, (api::Range{0.1, 2}));
  api::ExampleAttributes a{2, 1, 0.5, 0.7, 0.1, false, 0.6};
  EXPECT_TRUE(f.matches(a));
  a.loss = 2.5;
  EXPECT_FALSE(f.matches(a));
  EXPECT_TRUE(parse_filter("", kLabels).empty());
  EXPECT_TRUE(parse_filter("{}", kLabels).empty());
  EXPECT_TRUE(parse_filter(R"({"loss":[0,0]})", kLabels).matches({0, 0, 0.0, 0, 0, true, 1}));
}

TEST(Filter, RejectsUnknownKeysAndBadRanges) {
  for (const char* bad : {R"({"lossy":[0,1]})", R"({"loss":[1,0]})", R"({"loss":[0]})", R"({"labels":[5]})",
                          R"({"labels":["cats"]})", R"({"labels":0})", R"([1,2])", "{oops", R"({"loss":["a","b"]})"}) {
    EXPECT_EQ(kind_of([&] { parse_filter(std::string(bad), kLabels); }), ErrorKind::kInput) << bad;
  }
}

// ---------------------------------------------------------------------------
// Sessions

TEST(Sessions, IdleTimeoutReportsGone) {
  api::Clock::time_point now{};
  api::SessionStore store(std::chrono::seconds(60), 10, [&] { return now; });
  const ModelConfig c{10, 4, 2, 2, 4, 4, 2, 0};
  const auto a = store.create("r", 1, c);
  const auto id = a->snapshot().id;
  now += std::chrono::seconds(59);
  EXPECT_NO_THROW(store.get(id));  // refreshes the idle clock
  now += std::chrono::seconds(59);
  EXPECT_NO_THROW(store.get(id));
  now += std::chrono::seconds(60);
  EXPECT_EQ(kind_of([&] { store.get(id); }), ErrorKind::kGone);
  EXPECT_EQ(kind_of([&] { store.get("never-existed"); }), ErrorKind::kNotFound);
  EXPECT_EQ(store.size(), 0u);
}

TEST(Sessions, LruCapEvictsLeastRecentlyUsed) {
  api::Clock::time_point now{};
  api::SessionStore store(std::chrono::seconds(3600), 2, [&] { return now; });
  const ModelConfig c{10, 4, 2, 2, 4, 4, 2, 0};
  const auto a = store.create("r", 0, c)->snapshot().id;
  const auto b = store.create("r", 0, c)->snapshot().id;
  store.get(a);
  const auto d = store.create("r", 0, c)->snapshot().id;
  EXPECT_EQ(store.size(), 2u);
  EXPECT_NO_THROW(store.get(a));
  EXPECT_NO_THROW(store.get(d));
  EXPECT_EQ(kind_of([&] { store.get(b); }), ErrorKind::kGone);
  store.remove(a);
  EXPECT_EQ(kind_of([&] { store.get(a); }), ErrorKind::kGone);
}

TEST(Sessions, MaskEditsAndBounds) {
  api::SessionStore store(std::chrono::seconds(60), 0);
  const ModelConfig c{10, 4, 2, 2, 4, 4, 2, 0};
  const auto s = store.create("r", 0, c);
  s->mutate([](HeadMask& m) { m.prune(1, 1); });
  s->mutate([](HeadMask& m) { m.prune(1, 1); });
  EXPECT_EQ(s->snapshot().mask.pruned_count(), 1u);
  EXPECT_EQ(kind_of([&] { s->mutate([](HeadMask& m) { m.prune(2, 0); }); }), ErrorKind::kInput);
  EXPECT_EQ(kind_of([&] { s->mutate([](HeadMask& m) { m.prune(0, 2); }); }), ErrorKind::kInput);
}

// ---------------------------------------------------------------------------
// HTTP service over a small trained run

class ApiTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    tmp_ = new testing::TempDir();
    corpus_ = testing::topic_corpus(45, 31);
    train_to_run(testing::small_run_config(3), corpus_, tmp_->path(), "demo");
    const RunData run = load_run(tmp_->path(), "demo");
    for (auto e : checkpoint_epochs(run.paths)) precompute_checkpoint(run, e);
    // A second run left weights-only.
    train_to_run(testing::small_run_config(1), corpus_, tmp_->path(), "raw");

    fs::create_directories(tmp_->path() / "static");
    write_file(tmp_->path() / "static" / "index.html", "<html>t3</html>");
    api::ServiceOptions opts;
    opts.runs_root = tmp_->path();
    service_ = new api::Service(opts);
    server_ = new api::HttpServer(*service_, tmp_->path() / "static");
    port_ = server_->bind("127.0.0.1", 0);
    server_->start();
  }

  static void TearDownTestSuite() {
    server_->stop();
    delete server_;
    delete service_;
    delete tmp_;
  }

  HttpClient client() const { return HttpClient("127.0.0.1", port_); }

  static json expect_valid(const std::string& schema, const testing::HttpResult& r, int status = 200) {
    EXPECT_EQ(r.status, status) << r.body.dump();
    const auto v = testing::SchemaValidator::from_file(std::string(T3_SOURCE_DIR) + "/schemas/" + schema + ".schema.json");
    const auto errors = v.validate(r.body);
    EXPECT_TRUE(errors.empty()) << schema << ": " << (errors.empty() ? "" : errors[0]) << "\n" << r.body.dump().substr(0, 400);
    return r.body;
  }

  std::string new_session(std::size_t epoch = 3) {
    return expect_valid("session", client().post("/api/sessions", {{"run_id", "demo"}, {"epoch", epoch}}))["session_id"];
  }

  static std::string ckpt(std::size_t e) { return "/api/runs/demo/checkpoints/" + std::to_string(e); }

  static inline testing::TempDir* tmp_ = nullptr;
  static inline Corpus corpus_;
  static inline api::Service* service_ = nullptr;
  static inline api::HttpServer* server_ = nullptr;
  static inline int port_ = 0;
};

TEST_F(ApiTest, RunsAndCheckpoints) {
  auto c = client();
  expect_valid("health", c.get("/api/health"));
  const json runs = expect_valid("runs", c.get("/api/runs"));
  ASSERT_EQ(runs["runs"].size(), 2u);
  EXPECT_EQ(runs["runs"][0]["run_id"], "demo");
  EXPECT_EQ(runs["runs"][0]["corpus_size"], corpus_.size());

  const json cks = expect_valid("checkpoints", c.get("/api/runs/demo/checkpoints"));
  ASSERT_EQ(cks["checkpoints"].size(), 4u);  // init + 3 epochs
  for (std::size_t e = 0; e < 4; ++e) {
    EXPECT_EQ(cks["checkpoints"][e]["epoch"], e);
    EXPECT_EQ(cks["checkpoints"][e]["status"], "precomputed");
  }
  const json raw = expect_valid("checkpoints", c.get("/api/runs/raw/checkpoints"));
  EXPECT_EQ(raw["checkpoints"][1]["status"], "weights_only");
  expect_valid("error", c.get("/api/runs/nope/checkpoints"), 404);
  expect_valid("error", c.get("/api/runs/raw/checkpoints/1/projection"), 409);
  expect_valid("error", c.get(ckpt(9) + "/projection"), 404);
  expect_valid("error", c.get("/api/runs/demo/checkpoints/x/projection"), 400);
}

TEST(ApiEmpty, EmptyRunsRoot) {
  testing::TempDir tmp;
  api::Service s({tmp.path()});
  EXPECT_EQ(s.list_runs(), (json{{"runs", json::array()}}));
  api::Service missing({tmp.path() / "absent"});
  EXPECT_EQ(missing.list_runs()["runs"].size(), 0u);
}

TEST_F(ApiTest, ProjectionFilters) {
  auto c = client();
  const json all = expect_valid("projection", c.get(ckpt(3) + "/projection"));
  EXPECT_EQ(all["count"], corpus_.size());
  EXPECT_EQ(all["layer"], 2);
  const json l1 = expect_valid("projection", c.get(ckpt(3) + "/projection?mode=tsne&layer=1"));
  EXPECT_NE(l1["points"][0]["x"], all["points"][0]["x"]);

  const json none = expect_valid("projection", c.get(ckpt(3) + "/projection?filter=" + url_encode(R"({"loss":[0,0]})")));
  EXPECT_EQ(none["count"], 0);

  const json stats = json::parse(read_file(tmp_->path() / "demo/checkpoints/3/example_stats.json"));
  for (std::size_t k = 0; k < 3; ++k) {
    std::size_t expected = 0;
    for (const auto& e : stats["examples"]) expected += e["label"] == k ? 1 : 0;
    const std::string f = url_encode(json{{"labels", {k}}}.dump());
    EXPECT_EQ(expect_valid("projection", c.get(ckpt(3) + "/projection?filter=" + f))["count"], expected);
    EXPECT_EQ(expect_valid("examples", c.get(ckpt(3) + "/examples?page_size=1000&filter=" + f))["total"], expected);
  }

  const json dm = expect_valid("projection", c.get(ckpt(1) + "/projection?mode=datamap"));
  const json datamap = json::parse(read_file(tmp_->path() / "demo/datamap.json"));
  for (std::size_t i = 0; i < corpus_.size(); ++i) {
    EXPECT_EQ(dm["points"][i]["x"], datamap["records"][i]["variability"]);
    EXPECT_EQ(dm["points"][i]["y"], datamap["records"][i]["confidence"]);
  }
  EXPECT_EQ(dm["layer"], nullptr);

  const json missing = expect_valid("error", c.get(ckpt(3) + "/projection?layer=7"), 404);
  EXPECT_NE(missing["error"]["message"].get<std::string>().find("available layers: 1, 2"), std::string::npos);
  expect_valid("error", c.get(ckpt(3) + "/projection?mode=umap"), 400);
  expect_valid("error", c.get(ckpt(3) + "/projection?filter=" + url_encode(R"({"loss":[2,1]})")), 400);
  expect_valid("error", c.get(ckpt(3) + "/projection?filter=" + url_encode(R"({"colour":[0]})")), 400);
}

TEST_F(ApiTest, ExamplesPagination) {
  auto c = client();
  const std::string f = url_encode(R"({"labels":[0,1]})");
  const json full = expect_valid("examples", c.get(ckpt(2) + "/examples?page_size=1000&filter=" + f));
  json joined = json::array();
  for (std::size_t page = 0;; ++page) {
    const json p = expect_valid("examples", c.get(ckpt(2) + "/examples?page_size=7&page=" + std::to_string(page) + "&filter=" + f));
    if (p["rows"].empty()) break;
    for (const auto& r : p["rows"]) joined.push_back(r);
  }
  EXPECT_EQ(joined, full["rows"]);
  EXPECT_EQ(full["rows"][0]["text"], corpus_.examples[0].text);
  EXPECT_EQ(expect_valid("examples", c.get(ckpt(2) + "/examples?page=99"))["rows"].size(), 0u);
  expect_valid("error", c.get(ckpt(2) + "/examples?page_size=0"), 400);
  expect_valid("error", c.get(ckpt(2) + "/examples?page=-1"), 400);
}

TEST_F(ApiTest, HeadViews) {
  auto c = client();
  const json agg = expect_valid("heads", c.get(ckpt(3) + "/heads"));
  EXPECT_EQ(agg["importance"], json::parse(read_file(tmp_->path() / "demo/checkpoints/3/head_importance.json")));

  const json pat = expect_valid("heads", c.get(ckpt(3) + "/heads?view=pattern"));
  EXPECT_EQ(pat["pattern"]["size"], 8);
  EXPECT_EQ(pat["pattern"]["heads"].size(), 8u);

  const std::string id = corpus_.examples[4].id;
  const json inst = expect_valid("heads", c.get(ckpt(3) + "/heads?view=pattern&scale=instance&example=" + id));
  for (const auto& h : inst["pattern"]["heads"])
    for (const auto& row : h["weights"]) {
      double sum = 0;
      for (const auto& v : row) sum += v.get<double>();
      EXPECT_NEAR(sum, 1.0, 1e-6);
    }

  const json imp = expect_valid("heads", c.get(ckpt(3) + "/heads?scale=instance&example=" + id));
  EXPECT_EQ(imp["importance"]["scope"], "instance");

  // A pruned (zeroed) head scores exactly 0 at instance scale.
  const std::string sid = new_session();
  c.post("/api/sessions/" + sid + "/prune", {{"layer", 1}, {"head", 2}});
  const json masked = expect_valid("heads", c.get(ckpt(3) + "/heads?scale=instance&example=" + id + "&session=" + sid));
  EXPECT_EQ(masked["importance"]["raw"][1][2], 0.0);
  const json masked_pat =
      expect_valid("heads", c.get(ckpt(3) + "/heads?view=pattern&scale=instance&example=" + id + "&session=" + sid));
  EXPECT_EQ(masked_pat["pattern"]["heads"][6]["pruned"], true);
  EXPECT_EQ(masked_pat["pattern"]["heads"][6]["weights"], nullptr);

  expect_valid("error", c.get(ckpt(3) + "/heads?scale=instance"), 400);
  expect_valid("error", c.get(ckpt(3) + "/heads?scale=instance&example=nope"), 404);
  expect_valid("error", c.get(ckpt(2) + "/heads?scale=instance&example=" + id + "&session=" + sid), 400);
}

TEST_F(ApiTest, SessionLifecycle) {
  auto c = client();
  const std::string sid = new_session();
  const std::string base = "/api/sessions/" + sid;
  const std::string id = corpus_.examples[7].id;
  const json before = expect_valid("prediction", c.get(base + "/examples/" + id + "/prediction"));

  const json p1 = expect_valid("session", c.post(base + "/prune", {{"layer", 0}, {"head", 1}}));
  const json p2 = expect_valid("session", c.post(base + "/prune", {{"layer", 0}, {"head", 1}}));
  EXPECT_EQ(p1, p2);
  EXPECT_EQ(p2["pruned"], json::array({json::array({0, 1})}));
  const json pruned = expect_valid("prediction", c.get(base + "/examples/" + id + "/prediction"));
  EXPECT_EQ(pruned["pruned_count"], 1);
  EXPECT_NE(pruned["logits"], before["logits"]);

  expect_valid("session", c.post(base + "/restore", {{"layer", 0}, {"head", 1}}));
  EXPECT_EQ(expect_valid("prediction", c.get(base + "/examples/" + id + "/prediction")), before);

  expect_valid("error", c.post(base + "/prune", {{"layer", 2}, {"head", 0}}), 400);
  expect_valid("error", c.post(base + "/prune", {{"layer", 0}}), 400);
  expect_valid("error", c.post("/api/sessions", {{"run_id", "demo"}, {"epoch", 17}}), 404);
  expect_valid("error", c.get("/api/sessions/doesnotexist"), 404);

  expect_valid("session_deleted", c.del(base));
  expect_valid("error", c.get(base + "/examples/" + id + "/prediction"), 410);
}

TEST_F(ApiTest, PruneAllMatchesResidualOnly) {
  auto c = client();
  const std::string sid = new_session();
  const std::string base = "/api/sessions/" + sid;
  for (int l = 0; l < 2; ++l)
    for (int h = 0; h < 4; ++h) c.post(base + "/prune", {{"layer", l}, {"head", h}});
  const RunData run = load_run(tmp_->path(), "demo");
  const LoadedCheckpoint ck = load_checkpoint(run, 3);
  for (std::size_t i : {0u, 5u, 11u}) {
    const json p = expect_valid("prediction", c.get(base + "/examples/" + run.encoded[i].id + "/prediction"));
    const Vec oracle = testing::residual_only_logits(ck.params, run.encoded[i].example.tokens);
    for (Eigen::Index k = 0; k < oracle.size(); ++k) EXPECT_EQ(p["logits"][k].get<double>(), oracle[k]);
  }
  const json reset = expect_valid("session", c.post(base + "/reset"));
  EXPECT_TRUE(reset["pruned"].empty());
}

TEST_F(ApiTest, InstanceAnalysis) {
  auto c = client();
  const std::string sid = new_session();
  const std::string base = "/api/sessions/" + sid + "/examples/";
  const RunData run = load_run(tmp_->path(), "demo");
  const LoadedCheckpoint ck = load_checkpoint(run, 3);
  const auto& ex = run.encoded[3];

  const json att = expect_valid("attention", c.get(base + ex.id + "/attention?layer=1&head=3&token=2"));
  const auto row = instance_attention(ck.params, ex.example.tokens, 1, 3, 2, HeadMask::all_active(ck.params.config));
  EXPECT_EQ(att["weights"], json(*row));
  expect_valid("error", c.get(base + ex.id + "/attention?layer=1"), 400);
  expect_valid("error", c.get(base + ex.id + "/attention?layer=1&head=0&token=99"), 400);

  for (const char* method : {"input_gradient", "lrp"}) {
    for (const char* target : {"0", "2", "politics"}) {
      const json s = expect_valid("saliency", c.get(base + ex.id + "/saliency?method=" + method + "&target=" + target));
      double mx = 0;
      for (const auto& v : s["display_scores"]) mx = std::max(mx, v.get<double>());
      EXPECT_DOUBLE_EQ(mx, 1.0);
      EXPECT_EQ(s["tokens"].size(), s["signed_scores"].size());
      if (std::string(method) == "lrp") {
        const double out = s["lrp"]["output_relevance"], sum = s["lrp"]["token_relevance_sum"];
        EXPECT_LE(std::abs(sum - out), 1e-3 * std::abs(out));
      }
    }
  }
  const json bad = expect_valid("error", c.get(base + ex.id + "/saliency?method=lrp&target=9"), 400);
  EXPECT_NE(bad["error"]["message"].get<std::string>().find("2 (tech)"), std::string::npos);
  const json bad_method = expect_valid("error", c.get(base + ex.id + "/saliency?method=occlusion"), 400);
  EXPECT_NE(bad_method["error"]["message"].get<std::string>().find("input_gradient, lrp"), std::string::npos);
  expect_valid("error", c.get(base + "missing/prediction"), 404);
}

TEST_F(ApiTest, SessionIsolation) {
  auto c = client();
  const std::string a = "/api/sessions/" + new_session(), b = "/api/sessions/" + new_session();
  const std::string id = corpus_.examples[2].id;
  const auto pred = [&](const std::string& s) { return c.get(s + "/examples/" + id + "/prediction").body["logits"]; };
  const json base_a = pred(a), base_b = pred(b);
  EXPECT_EQ(base_a, base_b);
  const json agg = c.get(ckpt(3) + "/heads").body;

  c.post(a + "/prune", {{"layer", 0}, {"head", 0}});
  EXPECT_EQ(pred(b), base_b);
  c.post(b + "/prune", {{"layer", 1}, {"head", 3}});
  const json a1 = pred(a);
  c.post(b + "/prune", {{"layer", 1}, {"head", 0}});
  EXPECT_EQ(pred(a), a1);
  c.post(a + "/reset");
  EXPECT_EQ(pred(a), base_a);
  EXPECT_NE(pred(b), base_b);
  EXPECT_EQ(c.get(ckpt(3) + "/heads").body, agg);
}

TEST_F(ApiTest, StaticAndUnknownPaths) {
  auto c = client();
  const auto r = c.raw_get("/index.html");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(r->body, "<html>t3</html>");
  expect_valid("error", c.get("/api/definitely/not/here"), 404);
}

TEST_F(ApiTest, ComputeBudget) {
  api::ServiceOptions opts;
  opts.runs_root = tmp_->path();
  opts.compute_budget = 10;
  api::Service tight(opts);
  api::HttpServer server(tight);
  const int port = server.bind("127.0.0.1", 0);
  server.start();
  HttpClient c("127.0.0.1", port);
  const std::string sid = c.post("/api/sessions", {{"run_id", "demo"}, {"epoch", 0}}).body["session_id"];
  const auto r = c.get("/api/sessions/" + sid + "/examples/" + corpus_.examples[0].id + "/saliency");
  const json body = expect_valid("error", r, 503);
  EXPECT_EQ(body["error"]["code"], "over_budget");
  EXPECT_EQ(body["error"]["retriable"], true);
  EXPECT_EQ(r.retry_after, "1");
  // Artifact reads are not budgeted.
  expect_valid("heads", c.get("/api/runs/demo/checkpoints/0/heads"));
  server.stop();
}

TEST_F(ApiTest, ReadsAreDeterministic) {
  auto c = client();
  for (const std::string path : {ckpt(2) + "/projection", ckpt(2) + "/examples?page=1", ckpt(2) + "/heads?view=pattern"})
    EXPECT_EQ(c.get(path).body, c.get(path).body) << path;
}

}  // namespace
}  // namespace t3

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <map>
#include <numbers>
#include <set>

#include "bevswarm/metrics.hpp"
#include "bevswarm/rng.hpp"

using namespace bevswarm;

namespace {

DetectionBox box_at(double x, double y, double conf = 1.0, int cls = 0) {
  DetectionBox b;
  b.x = x;
  b.y = y;
  b.z = 0.9;
  b.w = 1.8;
  b.l = 4.5;
  b.h = 1.8;
  b.confidence = conf;
  b.cls = cls;
  return b;
}

// Reference AP: dense sampling of the precision envelope built from the
// exhaustive PR staircase.
double staircase_ap(const std::vector<DetectionBox>& preds, const std::vector<DetectionBox>& gts,
                    double d) {
  if (gts.empty()) return 0.0;
  if (preds.empty()) return 0.0;
  std::vector<int> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return preds[static_cast<std::size_t>(a)].confidence > preds[static_cast<std::size_t>(b)].confidence;
  });
  std::vector<bool> taken(gts.size(), false);
  std::vector<double> recalls, precisions;
  int tp = 0, fp = 0;
  for (int pi : order) {
    int best = -1;
    double best_d = d;
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (taken[gi]) continue;
      const double dist = std::hypot(preds[static_cast<std::size_t>(pi)].x - gts[gi].x,
                                     preds[static_cast<std::size_t>(pi)].y - gts[gi].y);
      if (dist <= best_d && (best < 0 || dist < best_d)) {
        best = static_cast<int>(gi);
        best_d = dist;
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      ++tp;
    } else {
      ++fp;
    }
    recalls.push_back(static_cast<double>(tp) / static_cast<double>(gts.size()));
    precisions.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  const int samples = 1000000;
  double area = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double r = 0.1 + 0.9 * (s + 0.5) / samples;
    double env = 0.0;
    for (std::size_t i = 0; i < recalls.size(); ++i)
      if (recalls[i] >= r) env = std::max(env, precisions[i]);
    if (env > 0.1) area += env * (0.9 / samples);
  }
  return std::clamp(area / 0.9, 0.0, 1.0);
}

// Reference panoptic metrics: explicit pixel sets, all pairs enumerated.
PanopticResult brute_panoptic(const InstanceMap& pred, const InstanceMap& gt) {
  std::map<int, std::set<int>> p_cells, g_cells;
  for (int x = 0; x < pred.X; ++x)
    for (int y = 0; y < pred.Y; ++y) {
      if (pred.at(x, y) != 0) p_cells[pred.at(x, y)].insert(x * pred.Y + y);
      if (gt.at(x, y) != 0) g_cells[gt.at(x, y)].insert(x * gt.Y + y);
    }
  PanopticResult r;
  double iou_sum = 0.0;
  for (const auto& [pid, pc] : p_cells) {
    for (const auto& [gid, gc] : g_cells) {
      if (pred.id_class.count(pid) && gt.id_class.count(gid) &&
          pred.id_class.at(pid) != gt.id_class.at(gid))
        continue;
      std::size_t inter = 0;
      for (int c : pc) inter += gc.count(c);
      const double uni = static_cast<double>(pc.size() + gc.size() - inter);
      const double iou = static_cast<double>(inter) / uni;
      if (iou > 0.5) {
        ++r.tp;
        iou_sum += iou;
      }
    }
  }
  r.fp = static_cast<int>(p_cells.size()) - r.tp;
  r.fn = static_cast<int>(g_cells.size()) - r.tp;
  if (r.tp == 0 && r.fp == 0 && r.fn == 0) {
    r.pq = r.sq = r.rq = 1.0;
    return r;
  }
  const double denom = r.tp + 0.5 * r.fp + 0.5 * r.fn;
  r.sq = r.tp > 0 ? iou_sum / r.tp : 0.0;
  r.rq = r.tp / denom;
  r.pq = iou_sum / denom;
  return r;
}

InstanceMap random_instance_map(SplitMix64& rng, int size, int max_instances) {
  InstanceMap m(size, size);
  const int n = 1 + static_cast<int>(rng.next_below(static_cast<std::uint64_t>(max_instances)));
  for (int id = 1; id <= n; ++id) {
    const int cx = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size)));
    const int cy = static_cast<int>(rng.next_below(static_cast<std::uint64_t>(size)));
    const int r = 1 + static_cast<int>(rng.next_below(3));
    for (int x = std::max(0, cx - r); x <= std::min(size - 1, cx + r); ++x)
      for (int y = std::max(0, cy - r); y <= std::min(size - 1, cy + r); ++y)
        if (m.at(x, y) == 0) m.at(x, y) = id;
    m.id_class[id] = static_cast<int>(rng.next_below(2));
  }
  return m;
}

}  // namespace

TEST_CASE("center-distance matching") {
  const std::vector<DetectionBox> gts = {box_at(0, 0)};

  SUBCASE("a prediction on top of a gt matches at 0.5 m") {
    const auto m = match_by_center_distance({box_at(0, 0)}, gts, 0.5);
    CHECK(m.pairs.size() == 1);
  }
  SUBCASE("only the higher-confidence of two nearby predictions matches") {
    const std::vector<DetectionBox> preds = {box_at(0.3, 0, 0.4), box_at(-0.2, 0, 0.9)};
    const auto m = match_by_center_distance(preds, gts, 2.0);
    REQUIRE(m.pairs.size() == 1);
    CHECK(m.pairs[0].first == 1);  // confidence 0.9 wins
  }
  SUBCASE("3 m away is unmatched at a 2 m threshold") {
    const auto m = match_by_center_distance({box_at(3.0, 0)}, gts, 2.0);
    CHECK(m.pairs.empty());
  }
  SUBCASE("each prediction takes the nearest free gt") {
    const std::vector<DetectionBox> gts2 = {box_at(0, 0), box_at(1.5, 0)};
    const std::vector<DetectionBox> preds = {box_at(0.1, 0, 0.9), box_at(0.2, 0, 0.8)};
    const auto m = match_by_center_distance(preds, gts2, 2.0);
    REQUIRE(m.pairs.size() == 2);
    CHECK(m.pairs[0] == std::pair<int, int>{0, 0});
    CHECK(m.pairs[1] == std::pair<int, int>{1, 1});
  }
}

TEST_CASE("average precision trivia") {
  std::vector<DetectionBox> gts, preds;
  for (int i = 0; i < 10; ++i) {
    gts.push_back(box_at(6.0 * i, 0.0));
    preds.push_back(box_at(6.0 * i, 0.0, 1.0 - 0.01 * i));
  }
  CHECK(mean_average_precision(preds, gts) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(mean_average_precision({}, gts) == 0.0);
  CHECK_FALSE(average_precision(preds, {}, 2.0).has_value());
}

TEST_CASE("average precision equals the exhaustive staircase oracle") {
  SplitMix64 rng(1234);
  for (int trial = 0; trial < 12; ++trial) {
    std::vector<DetectionBox> gts, preds;
    const int n_gt = 8 + static_cast<int>(rng.next_below(8));
    const int n_pred = 12 + static_cast<int>(rng.next_below(9));
    for (int i = 0; i < n_gt; ++i)
      gts.push_back(box_at(rng.next_double(-20, 20), rng.next_double(-20, 20)));
    for (int i = 0; i < n_pred; ++i) {
      if (i < n_gt && rng.next_double() < 0.7) {
        preds.push_back(box_at(gts[static_cast<std::size_t>(i)].x + rng.next_double(-1.8, 1.8),
                               gts[static_cast<std::size_t>(i)].y + rng.next_double(-1.8, 1.8),
                               rng.next_double(0.05, 1.0)));
      } else {
        preds.push_back(
            box_at(rng.next_double(-20, 20), rng.next_double(-20, 20), rng.next_double(0.05, 1.0)));
      }
    }
    for (double d : {1.0, 2.0, 4.0}) {
      const auto ap = average_precision(preds, gts, d);
      REQUIRE(ap.has_value());
      CHECK(*ap == doctest::Approx(staircase_ap(preds, gts, d)).epsilon(2e-4));
    }
  }
}

TEST_CASE("ap is monotone in the matching threshold") {
  SplitMix64 rng(77);
  std::vector<DetectionBox> gts, preds;
  for (int i = 0; i < 12; ++i) {
    gts.push_back(box_at(rng.next_double(-20, 20), rng.next_double(-20, 20)));
    preds.push_back(box_at(gts.back().x + rng.next_double(-3, 3),
                           gts.back().y + rng.next_double(-3, 3), rng.next_double(0.1, 1.0)));
  }
  double prev = -1.0;
  for (double d : {0.5, 1.0, 2.0, 4.0}) {
    const double ap = average_precision(preds, gts, d).value();
    CHECK(ap >= prev - 1e-12);
    prev = ap;
  }
}

TEST_CASE("true-positive error means") {
  std::vector<DetectionBox> gts = {box_at(0, 0), box_at(10, 0)};
  gts[0].yaw = 3.0;

  SUBCASE("identical boxes give zero errors") {
    const auto m = match_by_center_distance(gts, gts, 2.0);
    CHECK(mean_translation_error(gts, gts, m).value() == doctest::Approx(0.0));
    CHECK(mean_scale_error(gts, gts, m).value() == doctest::Approx(0.0));
    CHECK(mean_orientation_error(gts, gts, m).value() == doctest::Approx(0.0));
  }

  SUBCASE("a 1 m x-shift gives mATE exactly 1") {
    std::vector<DetectionBox> preds = gts;
    for (auto& b : preds) b.x += 1.0;
    const auto m = match_by_center_distance(preds, gts, 2.0);
    REQUIRE(m.pairs.size() == 2);
    CHECK(mean_translation_error(preds, gts, m).value() == doctest::Approx(1.0).epsilon(1e-9));
  }

  SUBCASE("orientation error wraps") {
    std::vector<DetectionBox> preds = gts;
    preds[0].yaw = -3.0;  // gt is 3.0
    const auto m = match_by_center_distance(preds, gts, 2.0);
    const double expect = (2.0 * std::numbers::pi - 6.0 + 0.0) / 2.0;  // second pair exact
    CHECK(mean_orientation_error(preds, gts, m).value() ==
          doctest::Approx(expect).epsilon(1e-9));
  }

  SUBCASE("scale error averages the three dimensions") {
    std::vector<DetectionBox> preds = gts;
    preds[0].w += 0.3;
    preds[0].l -= 0.6;
    preds[0].h += 0.9;
    const auto m = match_by_center_distance(preds, gts, 2.0);
    CHECK(mean_scale_error(preds, gts, m).value() ==
          doctest::Approx((0.3 + 0.6 + 0.9) / 3.0 / 2.0).epsilon(1e-9));
  }

  SUBCASE("empty matching reports absence") {
    const MatchResult empty;
    CHECK_FALSE(mean_translation_error(gts, gts, empty).has_value());
  }
}

TEST_CASE("segmentation iou") {
  SegMask a(4, 4), b(4, 4);
  CHECK(seg_iou(a, b) == 1.0);  // empty vs empty
  a.at(0, 0) = 1;
  CHECK(seg_iou(a, b) == 0.0);
  b.at(1, 1) = 1;
  CHECK(seg_iou(a, b) == 0.0);  // disjoint

  SegMask g(4, 4), p(4, 4);
  g.at(0, 0) = g.at(0, 1) = 1;
  p.at(0, 0) = 1;  // covers half, no extra
  CHECK(seg_iou(p, g) == doctest::Approx(0.5));

  SegMask same = g;
  CHECK(seg_iou(same, g) == 1.0);
}

TEST_CASE("panoptic hand case: one TP at 0.6, one FP, one FN") {
  // TP IoU 0.6 from integer counts: intersection 6, union 10.
  InstanceMap gt2(12, 12), pred2(12, 12);
  for (int x = 0; x < 8; ++x) gt2.at(x, 0) = 1;          // gt segment, 8 cells
  for (int x = 2; x < 8; ++x) pred2.at(x, 0) = 1;        // 6 shared
  pred2.at(9, 0) = pred2.at(10, 0) = 1;                  // 2 extra -> union 10
  gt2.at(0, 6) = 2;                                      // FN segment
  pred2.at(6, 9) = 2;                                    // FP segment
  gt2.id_class[1] = gt2.id_class[2] = 0;
  pred2.id_class[1] = pred2.id_class[2] = 0;

  const PanopticResult r = panoptic(pred2, gt2);
  CHECK(r.tp == 1);
  CHECK(r.fp == 1);
  CHECK(r.fn == 1);
  CHECK(r.sq == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(r.rq == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.pq == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("panoptic trivia and identities") {
  SplitMix64 rng(555);
  InstanceMap perfect = random_instance_map(rng, 16, 6);
  const PanopticResult r = panoptic(perfect, perfect);
  CHECK(r.pq == doctest::Approx(1.0));
  CHECK(r.sq == doctest::Approx(1.0));
  CHECK(r.rq == doctest::Approx(1.0));

  InstanceMap empty(16, 16);
  const PanopticResult e = panoptic(empty, empty);
  CHECK(e.pq == 1.0);
}

TEST_CASE("panoptic equals the exhaustive oracle on random maps") {
  SplitMix64 rng(999);
  for (int trial = 0; trial < 200; ++trial) {
    const InstanceMap pred = random_instance_map(rng, 16, 6);
    const InstanceMap gt = random_instance_map(rng, 16, 6);
    const PanopticResult fast = panoptic(pred, gt);
    const PanopticResult slow = brute_panoptic(pred, gt);
    CHECK(fast.tp == slow.tp);
    CHECK(fast.fp == slow.fp);
    CHECK(fast.fn == slow.fn);
    CHECK(fast.pq == doctest::Approx(slow.pq).epsilon(1e-9));
    CHECK(fast.sq == doctest::Approx(slow.sq).epsilon(1e-9));
    CHECK(fast.rq == doctest::Approx(slow.rq).epsilon(1e-9));
    CHECK(fast.pq == doctest::Approx(fast.sq * fast.rq).epsilon(1e-9));
  }
}

TEST_CASE("panoptic is invariant to instance relabeling") {
  SplitMix64 rng(31337);
  const InstanceMap pred = random_instance_map(rng, 16, 5);
  const InstanceMap gt = random_instance_map(rng, 16, 5);
  InstanceMap relabeled = pred;
  relabeled.id_class.clear();
  for (auto& id : relabeled.ids)
    if (id != 0) id = id * 7 + 3;
  for (const auto& [id, cls] : pred.id_class) relabeled.id_class[id * 7 + 3] = cls;
  const PanopticResult a = panoptic(pred, gt);
  const PanopticResult b = panoptic(relabeled, gt);
  CHECK(a.pq == doctest::Approx(b.pq).epsilon(1e-12));
  CHECK(a.tp == b.tp);
}

TEST_CASE("temporal iou") {
  SplitMix64 rng(2);
  SegMask a(8, 8), b(8, 8);
  for (int x = 0; x < 8; ++x) {
    a.at(x, 0) = 1;
    b.at(x, 0) = x < 4 ? 1 : 0;
  }
  const double single = seg_iou(b, a);
  CHECK(temporal_iou({b}, {a}) == doctest::Approx(single));
  CHECK(temporal_iou({b, b, b}, {a, a, a}) == doctest::Approx(single));

  // Random 3-frame case against the direct mean.
  std::vector<SegMask> ps, gs;
  double direct = 0.0;
  for (int t = 0; t < 3; ++t) {
    SegMask p(8, 8), g(8, 8);
    for (int x = 0; x < 8; ++x)
      for (int y = 0; y < 8; ++y) {
        p.at(x, y) = rng.next_below(3) == 0 ? 1 : 0;
        g.at(x, y) = rng.next_below(3) == 0 ? 1 : 0;
      }
    direct += seg_iou(p, g);
    ps.push_back(p);
    gs.push_back(g);
  }
  CHECK(temporal_iou(ps, gs) == doctest::Approx(direct / 3.0).epsilon(1e-12));
}

TEST_CASE("vpq reduces to pq on one frame and penalizes id swaps") {
  SplitMix64 rng(42);
  const InstanceMap pred = random_instance_map(rng, 16, 5);
  const InstanceMap gt = random_instance_map(rng, 16, 5);
  CHECK(vpq({pred}, {gt}) == doctest::Approx(panoptic(pred, gt).pq).epsilon(1e-12));

  // Two-frame scene with two objects; the swapped prediction exchanges ids
  // at t=1 while keeping identical masks.
  InstanceMap gt0(12, 12), gt1(12, 12);
  for (int y = 0; y < 3; ++y) {
    gt0.at(1, y) = 1;
    gt0.at(8, y) = 2;
    gt1.at(2, y) = 1;
    gt1.at(9, y) = 2;
  }
  gt0.id_class[1] = gt0.id_class[2] = 0;
  gt1.id_class = gt0.id_class;

  InstanceMap ok1 = gt1;
  InstanceMap swapped1 = gt1;
  for (auto& id : swapped1.ids) id = id == 1 ? 2 : (id == 2 ? 1 : 0);
  swapped1.id_class = gt1.id_class;

  const double faithful = vpq({gt0, ok1}, {gt0, gt1});
  const double swapped = vpq({gt0, swapped1}, {gt0, gt1});
  CHECK(faithful == doctest::Approx(1.0));
  CHECK(swapped < faithful - 0.2);
  // Per-frame panoptic quality ignores ids entirely and stays perfect.
  CHECK(panoptic(swapped1, gt1).pq == doctest::Approx(1.0));
  CHECK(vpq({gt0, ok1, gt0}, {gt0, gt1, gt0}) == doctest::Approx(1.0));
}

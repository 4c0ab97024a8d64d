#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "statfuse/core.hpp"
#include "statfuse/metrics.hpp"
#include "statfuse/rng.hpp"
#include "test_util.hpp"

using namespace statfuse;

namespace {

LabelMap map_of(int h, int w, const std::vector<int>& vals) {
  LabelMap m(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      m.at(y, x) = static_cast<std::uint16_t>(vals[y * w + x]);
  return m;
}

}  // namespace

TEST_CASE("perfect prediction scores 1.0 everywhere") {
  const auto gt = map_of(2, 3, {0, 1, 2, 2, 1, 0});
  const auto classes = ClassSet::with_default_names(3);
  const auto rep = evaluate(gt, gt, classes);
  CHECK(rep.element_count == 6);
  CHECK(abs_close(rep.mean_iou, 1.0, 1e-15));
  CHECK(abs_close(rep.mean_precision, 1.0, 1e-15));
  for (int k = 0; k < 3; ++k) {
    CHECK(rep.iou_valid[k]);
    CHECK(abs_close(rep.per_class_iou[k], 1.0, 1e-15));
    CHECK(abs_close(rep.per_class_precision[k], 1.0, 1e-15));
  }
}

TEST_CASE("hand-counted IoU and precision") {
  // 4 elements: gt (0,0,1,1), pred (0,1,1,1)
  // class 0: intersection 1, union 2 -> IoU 1/2; predicted 1 -> precision 1/1
  // class 1: intersection 2, union 3 -> IoU 2/3; predicted 3 -> precision 2/3
  const auto gt = map_of(1, 4, {0, 0, 1, 1});
  const auto pred = map_of(1, 4, {0, 1, 1, 1});
  const auto classes = ClassSet::with_default_names(2);
  const auto rep = evaluate(pred, gt, classes);
  CHECK(abs_close(rep.per_class_iou[0], 0.5, 1e-15));
  CHECK(abs_close(rep.per_class_iou[1], 2.0 / 3.0, 1e-15));
  CHECK(abs_close(rep.mean_iou, 0.5 * (0.5 + 2.0 / 3.0), 1e-15));
  CHECK(abs_close(rep.per_class_precision[0], 1.0, 1e-15));
  CHECK(abs_close(rep.per_class_precision[1], 2.0 / 3.0, 1e-15));
  CHECK(abs_close(rep.mean_precision, 0.5 * (1.0 + 2.0 / 3.0), 1e-15));
}

TEST_CASE("ignore label drops elements from every count") {
  auto classes = ClassSet::with_default_names(3);
  classes.ignore_index = 2;
  const auto gt = map_of(1, 4, {0, 2, 1, 2});
  const auto pred = map_of(1, 4, {0, 0, 0, 1});
  const auto rep = evaluate(pred, gt, classes);
  CHECK(rep.element_count == 2);
  // surviving pairs: (pred 0, gt 0), (pred 0, gt 1)
  CHECK(abs_close(rep.per_class_iou[0], 0.5, 1e-15));
  CHECK(abs_close(rep.per_class_iou[1], 0.0, 1e-15));
  CHECK(abs_close(rep.per_class_precision[0], 0.5, 1e-15));
  CHECK_FALSE(rep.precision_valid[1]);  // class 1 never predicted
}

TEST_CASE("all elements ignored yields an empty report") {
  auto classes = ClassSet::with_default_names(3);
  classes.ignore_index = 2;
  const auto gt = map_of(1, 3, {2, 2, 2});
  const auto pred = map_of(1, 3, {0, 1, 0});
  const auto rep = evaluate(pred, gt, classes);
  CHECK(rep.element_count == 0);
  for (int k = 0; k < 2; ++k) {
    CHECK_FALSE(rep.iou_valid[k]);
    CHECK_FALSE(rep.precision_valid[k]);
  }
  CHECK(abs_close(rep.mean_iou, 0.0, 1e-15));
}

TEST_CASE("absent class is excluded from the mean") {
  const auto classes = ClassSet::with_default_names(3);
  const auto gt = map_of(1, 2, {0, 1});
  const auto pred = map_of(1, 2, {0, 1});
  const auto rep = evaluate(pred, gt, classes);
  CHECK_FALSE(rep.iou_valid[2]);
  CHECK(abs_close(rep.mean_iou, 1.0, 1e-15));  // mean over classes 0 and 1
}

TEST_CASE("batch evaluation equals concatenated evaluation exactly") {
  Rng rng(606);
  const auto classes = ClassSet::with_default_names(4);
  std::vector<LabelMap> preds, gts;
  const int h = 6, w = 7, scenes = 5;
  LabelMap big_pred(h * scenes, w), big_gt(h * scenes, w);
  for (int s = 0; s < scenes; ++s) {
    LabelMap pred(h, w), gt(h, w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        pred.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 4);
        gt.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 4);
        big_pred.at(s * h + y, x) = pred.at(y, x);
        big_gt.at(s * h + y, x) = gt.at(y, x);
      }
    preds.push_back(std::move(pred));
    gts.push_back(std::move(gt));
  }
  const auto batch = evaluate_batch(preds, gts, classes);
  const auto concat = evaluate(big_pred, big_gt, classes);
  CHECK(batch.element_count == concat.element_count);
  CHECK(batch.mean_iou == concat.mean_iou);  // identical count arithmetic
  CHECK(batch.mean_precision == concat.mean_precision);
  for (int k = 0; k < 4; ++k) {
    CHECK(batch.per_class_iou[k] == concat.per_class_iou[k]);
    CHECK(batch.per_class_precision[k] == concat.per_class_precision[k]);
  }
}

TEST_CASE("IoU is symmetric under pred/gt swap, precision is not") {
  Rng rng(77);
  const auto classes = ClassSet::with_default_names(3);
  for (int trial = 0; trial < 20; ++trial) {
    LabelMap a(5, 5), b(5, 5);
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) {
        a.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 3);
        b.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 3);
      }
    const auto ab = evaluate(a, b, classes);
    const auto ba = evaluate(b, a, classes);
    for (int k = 0; k < 3; ++k)
      if (ab.iou_valid[k] && ba.iou_valid[k])
        CHECK(abs_close(ab.per_class_iou[k], ba.per_class_iou[k], 1e-15));
  }
}

TEST_CASE("per-class IoU never exceeds per-class precision") {
  Rng rng(404);
  const auto classes = ClassSet::with_default_names(4);
  for (int trial = 0; trial < 30; ++trial) {
    LabelMap pred(6, 6), gt(6, 6);
    for (int y = 0; y < 6; ++y)
      for (int x = 0; x < 6; ++x) {
        pred.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 4);
        gt.at(y, x) = static_cast<std::uint16_t>(rng.next_u64() % 4);
      }
    const auto rep = evaluate(pred, gt, classes);
    for (int k = 0; k < 4; ++k)
      if (rep.precision_valid[k])
        CHECK(rep.per_class_iou[k] <= rep.per_class_precision[k] + 1e-15);
  }
}

TEST_CASE("class relabeling permutes per-class metrics") {
  Rng rng(55);
  const auto classes = ClassSet::with_default_names(3);
  const std::vector<int> perm{2, 0, 1};
  LabelMap pred(8, 8), gt(8, 8), ppred(8, 8), pgt(8, 8);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) {
      const int p = static_cast<int>(rng.next_u64() % 3);
      const int g = static_cast<int>(rng.next_u64() % 3);
      pred.at(y, x) = static_cast<std::uint16_t>(p);
      gt.at(y, x) = static_cast<std::uint16_t>(g);
      ppred.at(y, x) = static_cast<std::uint16_t>(perm[p]);
      pgt.at(y, x) = static_cast<std::uint16_t>(perm[g]);
    }
  const auto plain = evaluate(pred, gt, classes);
  const auto permuted = evaluate(ppred, pgt, classes);
  for (int k = 0; k < 3; ++k) {
    CHECK(plain.per_class_iou[k] == permuted.per_class_iou[perm[k]]);
    CHECK(plain.per_class_precision[k] ==
          permuted.per_class_precision[perm[k]]);
  }
  CHECK(abs_close(plain.mean_iou, permuted.mean_iou, 1e-15));
}

TEST_CASE("evaluate validates shapes and label ranges") {
  const auto classes = ClassSet::with_default_names(2);
  const auto gt = map_of(1, 2, {0, 1});
  const auto tall = map_of(2, 2, {0, 1, 0, 1});
  CHECK_THROWS_AS(evaluate(tall, gt, classes), std::invalid_argument);
  const auto out_of_range = map_of(1, 2, {0, 5});
  CHECK_THROWS_AS(evaluate(out_of_range, gt, classes), std::invalid_argument);
}

TEST_CASE("report_from_confusion matches evaluate") {
  const auto classes = ClassSet::with_default_names(2);
  const auto gt = map_of(1, 4, {0, 0, 1, 1});
  const auto pred = map_of(1, 4, {0, 1, 1, 1});
  const auto direct = evaluate(pred, gt, classes);
  const auto rebuilt = report_from_confusion(direct.eval_confusion, classes);
  CHECK(rebuilt.mean_iou == direct.mean_iou);
  CHECK(rebuilt.element_count == direct.element_count);
}

TEST_CASE("bench_inference runs the callable and reports sane stats") {
  int calls = 0;
  const auto result = bench_inference([&] { ++calls; }, 5);
  CHECK(calls == 5);
  CHECK(result.mean_ms >= 0.0);
  CHECK(result.stddev_ms >= 0.0);
  CHECK_THROWS_AS(bench_inference([] {}, 0), std::invalid_argument);
}

TEST_CASE("report writers emit every class and both metrics") {
  auto classes = ClassSet::with_default_names(2);
  classes.names = {"road", "sky"};
  const auto gt = map_of(1, 4, {0, 0, 1, 1});
  const auto pred = map_of(1, 4, {0, 1, 1, 1});
  const auto rep = evaluate(pred, gt, classes);

  std::ostringstream text;
  write_report_text(text, rep, classes);
  CHECK(text.str().find("road") != std::string::npos);
  CHECK(text.str().find("sky") != std::string::npos);
  CHECK(text.str().find("mean") != std::string::npos);

  std::ostringstream tsv;
  write_report_tsv(tsv, rep, classes);
  const std::string t = tsv.str();
  CHECK(t.find("road\tiou\t") != std::string::npos);
  CHECK(t.find("sky\tprecision\t") != std::string::npos);
  // values round-trip at full precision
  CHECK(t.find("0.5") != std::string::npos);
}

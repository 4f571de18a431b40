#include "lidint/annotate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "lidint/rng.hpp"

namespace lidint {

char judgement_letter(Judgement j) {
  switch (j) {
    case Judgement::E: return 'E';
    case Judgement::D: return 'D';
    case Judgement::L: return 'L';
  }
  return '?';
}

Judgement judgement_from_letter(char c) {
  switch (c) {
    case 'E': return Judgement::E;
    case 'D': return Judgement::D;
    case 'L': return Judgement::L;
    default: throw ValidationError(std::string("unknown judgement letter '") + c + "'");
  }
}

std::vector<Point2> poisson_disk(int width, int height, double r_frac, std::uint64_t seed) {
  if (width < 1 || height < 1) throw ValidationError("poisson_disk: empty domain");
  if (!(r_frac > 0.0) || r_frac > 0.5) {
    throw ValidationError("poisson_disk: r_frac must be in (0, 0.5]");
  }
  const double r = r_frac * std::min(width, height);
  const double r2 = r * r;
  const double cell = r / std::sqrt(2.0);
  const int gw = static_cast<int>(std::ceil(width / cell));
  const int gh = static_cast<int>(std::ceil(height / cell));
  std::vector<int> grid(static_cast<std::size_t>(gw) * gh, -1);

  std::vector<Point2> points;
  std::vector<int> active;
  Rng rng(seed);

  auto cell_of = [&](const Point2& p) {
    const int cx = std::min(gw - 1, static_cast<int>(p.x / cell));
    const int cy = std::min(gh - 1, static_cast<int>(p.y / cell));
    return std::pair<int, int>(cx, cy);
  };
  auto far_enough = [&](const Point2& p) {
    const auto [cx, cy] = cell_of(p);
    for (int gy = std::max(0, cy - 2); gy <= std::min(gh - 1, cy + 2); ++gy) {
      for (int gx = std::max(0, cx - 2); gx <= std::min(gw - 1, cx + 2); ++gx) {
        const int idx = grid[static_cast<std::size_t>(gy) * gw + gx];
        if (idx < 0) continue;
        const double dx = points[idx].x - p.x;
        const double dy = points[idx].y - p.y;
        if (dx * dx + dy * dy < r2) return false;
      }
    }
    return true;
  };
  auto insert = [&](const Point2& p) {
    const auto [cx, cy] = cell_of(p);
    grid[static_cast<std::size_t>(cy) * gw + cx] = static_cast<int>(points.size());
    active.push_back(static_cast<int>(points.size()));
    points.push_back(p);
  };

  insert({rng.uniform(0.0, width), rng.uniform(0.0, height)});
  constexpr int kAttempts = 30;
  while (!active.empty()) {
    const std::size_t pick = rng.uniform_index(active.size());
    const Point2 base = points[active[pick]];
    bool placed = false;
    for (int attempt = 0; attempt < kAttempts; ++attempt) {
      const double rad = r * (1.0 + rng.uniform());
      const double ang = rng.uniform(0.0, 6.28318530717958647692);
      const Point2 cand{base.x + rad * std::cos(ang), base.y + rad * std::sin(ang)};
      if (cand.x < 0.0 || cand.x >= width || cand.y < 0.0 || cand.y >= height) continue;
      if (!far_enough(cand)) continue;
      insert(cand);
      placed = true;
      break;
    }
    if (!placed) {
      active[pick] = active.back();
      active.pop_back();
    }
  }
  return points;
}

GrayMap sobel_magnitude(const GrayMap& gray) {
  GrayMap out = GrayMap::zeros(gray.width, gray.height);
  auto sample = [&](int x, int y) {
    x = std::clamp(x, 0, gray.width - 1);
    y = std::clamp(y, 0, gray.height - 1);
    return gray.at(x, y);
  };
  for (int y = 0; y < gray.height; ++y) {
    for (int x = 0; x < gray.width; ++x) {
      const double gx = -sample(x - 1, y - 1) + sample(x + 1, y - 1) - 2.0 * sample(x - 1, y) +
                        2.0 * sample(x + 1, y) - sample(x - 1, y + 1) + sample(x + 1, y + 1);
      const double gy = -sample(x - 1, y - 1) - 2.0 * sample(x, y - 1) - sample(x + 1, y - 1) +
                        sample(x - 1, y + 1) + 2.0 * sample(x, y + 1) + sample(x + 1, y + 1);
      out.at(x, y) = std::hypot(gx, gy);
    }
  }
  return out;
}

std::vector<Point2> filter_points(const std::vector<Point2>& points, const LinearImage& img,
                                  const FilterThresholds& thresholds) {
  const GrayMap lum = luminance(img);
  const GrayMap edges = sobel_magnitude(lum);
  const int radius = static_cast<int>(std::ceil(thresholds.edge_radius));
  const double radius2 = thresholds.edge_radius * thresholds.edge_radius;

  std::vector<Point2> kept;
  kept.reserve(points.size());
  for (const Point2& p : points) {
    const int px = std::clamp(static_cast<int>(std::lround(p.x)), 0, img.width - 1);
    const int py = std::clamp(static_cast<int>(std::lround(p.y)), 0, img.height - 1);
    const double l = lum.at(px, py);
    if (l < thresholds.lum_lo || l > thresholds.lum_hi) continue;
    bool near_edge = false;
    for (int dy = -radius; dy <= radius && !near_edge; ++dy) {
      for (int dx = -radius; dx <= radius; ++dx) {
        if (dx * dx + dy * dy > radius2) continue;
        const int qx = px + dx;
        const int qy = py + dy;
        if (qx < 0 || qx >= img.width || qy < 0 || qy >= img.height) continue;
        if (edges.at(qx, qy) > thresholds.edge_threshold) {
          near_edge = true;
          break;
        }
      }
    }
    if (!near_edge) kept.push_back(p);
  }
  return kept;
}

namespace {

inline double orient2d(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
inline double incircle(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad2 = adx * adx + ady * ady;
  const double bd2 = bdx * bdx + bdy * bdy;
  const double cd2 = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd2 - cdy * bd2) - ady * (bdx * cd2 - cdx * bd2) +
         ad2 * (bdx * cdy - cdx * bdy);
}

struct Tri {
  int a, b, c;
};

std::vector<std::pair<int, int>> nearest_neighbor_path(const std::vector<Point2>& pts) {
  // Order along the direction of largest spread and link consecutive points.
  int lo = 0, hi = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) {
      const double dx = pts[i].x - pts[j].x;
      const double dy = pts[i].y - pts[j].y;
      const double d2 = dx * dx + dy * dy;
      if (d2 > best) {
        best = d2;
        lo = static_cast<int>(i);
        hi = static_cast<int>(j);
      }
    }
  }
  const double dirx = pts[hi].x - pts[lo].x;
  const double diry = pts[hi].y - pts[lo].y;
  std::vector<int> order(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) order[i] = static_cast<int>(i);
  std::sort(order.begin(), order.end(), [&](int i, int j) {
    const double pi = pts[i].x * dirx + pts[i].y * diry;
    const double pj = pts[j].x * dirx + pts[j].y * diry;
    if (pi != pj) return pi < pj;
    return i < j;
  });
  std::vector<std::pair<int, int>> out;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    out.emplace_back(std::min(order[k], order[k + 1]), std::max(order[k], order[k + 1]));
  }
  return out;
}

}  // namespace

std::vector<std::pair<int, int>> delaunay_pairs(const std::vector<Point2>& points) {
  const std::size_t n = points.size();
  if (n < 2) throw DegenerateGeometryError("delaunay_pairs: needs at least two points");
  if (n == 2) return {{0, 1}};

  // Collinearity test: spread of the points around their longest chord.
  {
    double min_x = points[0].x, max_x = points[0].x, min_y = points[0].y, max_y = points[0].y;
    for (const Point2& p : points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
    const double scale = std::max({max_x - min_x, max_y - min_y, 1.0});
    bool collinear = true;
    for (std::size_t i = 2; i < n && collinear; ++i) {
      if (std::abs(orient2d(points[0], points[1], points[i])) > 1e-9 * scale * scale) {
        collinear = false;
      }
    }
    if (collinear) return nearest_neighbor_path(points);
  }

  // Bowyer-Watson over the point set plus a generously sized super-triangle.
  std::vector<Point2> pts = points;
  double min_x = pts[0].x, max_x = pts[0].x, min_y = pts[0].y, max_y = pts[0].y;
  for (const Point2& p : pts) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  const double cx = 0.5 * (min_x + max_x);
  const double cy = 0.5 * (min_y + max_y);
  const double span = std::max({max_x - min_x, max_y - min_y, 1.0});
  const int s0 = static_cast<int>(n), s1 = static_cast<int>(n) + 1, s2 = static_cast<int>(n) + 2;
  pts.push_back({cx - 30.0 * span, cy - 20.0 * span});
  pts.push_back({cx + 30.0 * span, cy - 20.0 * span});
  pts.push_back({cx, cy + 30.0 * span});

  std::vector<Tri> tris{{s0, s1, s2}};
  auto make_ccw = [&](Tri& t) {
    if (orient2d(pts[t.a], pts[t.b], pts[t.c]) < 0.0) std::swap(t.b, t.c);
  };
  make_ccw(tris[0]);

  for (int pi = 0; pi < static_cast<int>(n); ++pi) {
    const Point2& p = pts[pi];
    std::vector<std::size_t> bad;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      if (incircle(pts[tris[t].a], pts[tris[t].b], pts[tris[t].c], p) > 0.0) bad.push_back(t);
    }
    // Boundary of the cavity: edges of bad triangles that appear only once.
    std::vector<std::pair<int, int>> boundary;
    auto toggle = [&](int u, int v) {
      const auto rev = std::make_pair(v, u);
      const auto it = std::find(boundary.begin(), boundary.end(), rev);
      if (it != boundary.end()) {
        boundary.erase(it);
      } else {
        boundary.emplace_back(u, v);
      }
    };
    for (std::size_t t : bad) {
      toggle(tris[t].a, tris[t].b);
      toggle(tris[t].b, tris[t].c);
      toggle(tris[t].c, tris[t].a);
    }
    for (auto it = bad.rbegin(); it != bad.rend(); ++it) {
      tris[*it] = tris.back();
      tris.pop_back();
    }
    for (const auto& [u, v] : boundary) {
      Tri t{u, v, pi};
      make_ccw(t);
      tris.push_back(t);
    }
  }

  std::vector<std::pair<int, int>> edges;
  auto push_edge = [&](int u, int v) {
    if (u >= static_cast<int>(n) || v >= static_cast<int>(n)) return;
    edges.emplace_back(std::min(u, v), std::max(u, v));
  };
  for (const Tri& t : tris) {
    push_edge(t.a, t.b);
    push_edge(t.b, t.c);
    push_edge(t.c, t.a);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

AggregatedJudgement aggregate(const std::vector<AnnotatorAnswer>& answers) {
  if (answers.size() != 5) {
    throw ValidationError("aggregate: expected exactly 5 answers, got " +
                          std::to_string(answers.size()));
  }
  double a1 = 0.0, a2 = 0.0;
  for (const AnnotatorAnswer& ans : answers) {
    if (ans.same_albedo != 1 && ans.same_albedo != -1) {
      throw ValidationError("aggregate: same_albedo must be +1 or -1");
    }
    if (ans.first_darker != 1 && ans.first_darker != -1) {
      throw ValidationError("aggregate: first_darker must be +1 or -1");
    }
    if (ans.confidence != 1.0 && ans.confidence != 0.8 && ans.confidence != 0.3) {
      throw ValidationError("aggregate: confidence must be one of 1.0, 0.8, 0.3");
    }
    a1 += ans.same_albedo * ans.confidence;
    a2 += ans.first_darker * ans.confidence;
  }
  if (a1 > 0.0) return {Judgement::E, a1};
  if (a2 > 0.0) return {Judgement::D, a2};
  return {Judgement::L, -a2};
}

AggregatedAnnotations aggregate_batch(const std::vector<AnsweredPair>& answered) {
  AggregatedAnnotations out;
  for (const AnsweredPair& ap : answered) {
    const AggregatedJudgement agg = aggregate(ap.answers);
    if (agg.weight > 0.0) {
      out.pairs.push_back({ap.p1x, ap.p1y, ap.p2x, ap.p2y, agg.judgement, agg.weight});
    } else {
      ++out.discarded;
    }
  }
  return out;
}

void validate_pair(const AnnotationPair& pair, int width, int height) {
  if (pair.p1x == pair.p2x && pair.p1y == pair.p2y) {
    throw ValidationError("annotation pair: both endpoints are the same pixel");
  }
  for (const auto& [x, y] : {std::pair<int, int>{pair.p1x, pair.p1y}, {pair.p2x, pair.p2y}}) {
    if (x < 0 || x >= width || y < 0 || y >= height) {
      throw ValidationError("annotation pair: point (" + std::to_string(x) + ", " +
                            std::to_string(y) + ") outside " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
  }
  if (!(pair.weight > 0.0)) throw ValidationError("annotation pair: weight must be > 0");
}

std::vector<AnnotationPair> simulate_judgements(const LinearImage& gt_albedo,
                                                const std::vector<std::pair<int, int>>& pairs,
                                                const std::vector<Point2>& points, double delta) {
  if (!(delta > 0.0)) throw ValidationError("simulate_judgements: delta must be > 0");
  const GrayMap lum = luminance(gt_albedo);
  auto pixel = [&](const Point2& p) {
    return std::pair<int, int>(std::clamp(static_cast<int>(std::lround(p.x)), 0, lum.width - 1),
                               std::clamp(static_cast<int>(std::lround(p.y)), 0, lum.height - 1));
  };
  std::vector<AnnotationPair> out;
  out.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    const auto [x1, y1] = pixel(points[i]);
    const auto [x2, y2] = pixel(points[j]);
    if (x1 == x2 && y1 == y2) continue;  // sub-pixel neighbors collapse; skip
    const double l1 = std::max(lum.at(x1, y1), 1e-6);
    const double l2 = std::max(lum.at(x2, y2), 1e-6);
    Judgement judgement = Judgement::E;
    if (l2 / l1 > 1.0 + delta) {
      judgement = Judgement::D;
    } else if (l1 / l2 > 1.0 + delta) {
      judgement = Judgement::L;
    }
    out.push_back({x1, y1, x2, y2, judgement, 1.0});
  }
  return out;
}

void save_annotations(const std::string& path, const std::string& image_id,
                      const std::vector<AnnotationPair>& pairs) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const AnnotationPair& pair : pairs) {
    nlohmann::json j;
    j["image_id"] = image_id;
    j["p1"] = {pair.p1x, pair.p1y};
    j["p2"] = {pair.p2x, pair.p2y};
    j["J"] = std::string(1, judgement_letter(pair.judgement));
    j["w"] = pair.weight;
    out << j.dump() << "\n";
  }
  if (!out) throw IoError("failed writing " + path);
}

std::vector<AnnotationRecord> load_annotations(const std::string& path,
                                               const AnnotationFieldMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<AnnotationRecord> records;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": invalid JSON: " + e.what(),
                       line_no);
    }
    try {
      AnnotationRecord rec;
      rec.image_id = j.at(mapping.image_id).get<std::string>();
      const auto& p1 = j.at(mapping.p1);
      const auto& p2 = j.at(mapping.p2);
      if (!p1.is_array() || p1.size() != 2 || !p2.is_array() || p2.size() != 2) {
        throw ValidationError("p1/p2 must be [x, y] arrays");
      }
      rec.pair.p1x = p1[0].get<int>();
      rec.pair.p1y = p1[1].get<int>();
      rec.pair.p2x = p2[0].get<int>();
      rec.pair.p2y = p2[1].get<int>();
      const std::string letter = j.at(mapping.judgement).get<std::string>();
      if (letter.size() != 1) throw ValidationError("judgement must be a single letter");
      rec.pair.judgement = judgement_from_letter(letter[0]);
      rec.pair.weight = j.at(mapping.weight).get<double>();
      if (rec.pair.p1x == rec.pair.p2x && rec.pair.p1y == rec.pair.p2y) {
        throw ValidationError("pair endpoints coincide");
      }
      if (!(rec.pair.weight > 0.0)) throw ValidationError("weight must be > 0");
      records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    } catch (const ValidationError& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what(), line_no);
    }
  }
  return records;
}

}  // namespace lidint

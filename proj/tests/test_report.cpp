// Copyright 2026 The zennas Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <sstream>

#include "zennas/report.hpp"

using namespace zennas;

TEST(Stats, ReferenceValues) {
  // Reference values from an independent statistics package.
  const std::vector<double> x{1, 2, 3, 4, 5}, y{5, 6, 7, 8, 7};
  EXPECT_NEAR(spearman(x, y), 0.8207826816681233, 1e-12);
  EXPECT_NEAR(kendall_tau(x, y), 0.7378647873726218, 1e-12);
  EXPECT_NEAR(pearson(x, y), 0.8320502943378436, 1e-12);
  const std::vector<double> a{12, 2, 1, 12, 2}, b{1, 4, 7, 1, 0};
  EXPECT_NEAR(kendall_tau(a, b), -0.4714045207910316, 1e-12);
  EXPECT_NEAR(spearman(a, b), -0.5407380704358752, 1e-12);
}

TEST(Stats, PerfectOrderings) {
  const std::vector<double> x{1, 2, 3, 4}, up{10, 20, 30, 40}, down{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(kendall_tau(x, up), 1.0);
  EXPECT_DOUBLE_EQ(kendall_tau(x, down), -1.0);
  EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
}

TEST(Stats, AverageRanksWithTies) {
  const auto r = average_ranks({3.0, 1.0, 3.0, 2.0});
  EXPECT_EQ(r, (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
}

TEST(Stats, SlopeOfLine) {
  EXPECT_NEAR(ls_slope({1, 2, 3, 4}, {3, 5, 7, 9}), 2.0, 1e-12);
}

TEST(Csv, ScoreHeaderAndRows) {
  std::ostringstream os;
  write_score_csv(os, {{"resnet18", "zen", 57.5, 0.25, 1.5, 7}, {"a,b", "phi", INFINITY, 0.0, 0.0, 0}});
  EXPECT_EQ(os.str(),
            "arch_id,proxy,value,std_error,wall_time,seed\n"
            "resnet18,zen,57.5,0.25,1.5,7\n"
            "\"a,b\",phi,inf,0,0,0\n");
}

TEST(Csv, LogHeader) {
  ConvergenceLog log;
  log.entries.push_back({3, 1.0, 0.5, 0.75, 0.125});
  std::ostringstream os;
  write_log_csv(os, log);
  EXPECT_EQ(os.str(), "iteration,best_score,population_min,population_mean,wall_time\n3,1,0.5,0.75,0.125\n");
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 59.53, -1e-300, 6.02214076e23}) EXPECT_EQ(std::stod(format_double(v)), v);
}

TEST(Svg, WellFormedAndEscaped) {
  const std::string s = svg_line_chart("a < b & c", "x", "y", {{"one", {1, 2, 3}, {1, 4, 9}}, {"two", {1, 2}, {NAN, 2}}});
  EXPECT_EQ(s.rfind("<?xml", 0), 0u);
  EXPECT_NE(s.find("a &lt; b &amp; c"), std::string::npos);
  EXPECT_EQ(s.find("a < b"), std::string::npos);
  EXPECT_NE(s.find("</svg>"), std::string::npos);
  EXPECT_EQ(std::count(s.begin(), s.end(), '<'), std::count(s.begin(), s.end(), '>'));
  EXPECT_EQ(s.find("nan"), std::string::npos);
}

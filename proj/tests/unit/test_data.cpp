#include "multicause/dataset.hpp"
#include "multicause/errors.hpp"
#include "support.hpp"

#include <doctest.h>

#include <fstream>

using namespace multicause;

namespace {

std::string write_file(const std::string& name, const std::string& text) {
  const auto path = (testing::scratch_dir() / name).string();
  std::ofstream(path) << text;
  return path;
}

CsvSchema xy_schema() {
  CsvSchema s;
  s.outcome = "y";
  s.treatments = {"x1", "x2"};
  return s;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("small csv parses into blocks by role") {
  const auto path = write_file("small.csv", "y,x1,x2\n1,2,3\n4,5,6\n");
  const Dataset d = load_csv(path, xy_schema());
  CHECK(d.n() == 2);
  CHECK(d.p() == 2);
  CHECK_FALSE(d.has_z());
  CHECK(d.y()(1) == 4.0);
  CHECK(d.x()(0, 1) == 3.0);
  CHECK(d.names().treatments[1] == "x2");
}

TEST_CASE("columns are grouped in schema order regardless of file order") {
  const auto path = write_file("shuffled.csv", "z1,x2,y,x1\n7,3,1,2\n8,6,4,5\n");
  CsvSchema s = xy_schema();
  s.instruments = {"z1"};
  const Dataset d = load_csv(path, s);
  CHECK(d.x()(0, 0) == 2.0);
  CHECK(d.x()(1, 1) == 6.0);
  CHECK(d.z()(1, 0) == 8.0);
  CHECK(d.y()(0) == 1.0);
}

TEST_CASE("mouse-shaped fixture loads with 227 rows, 17 treatments and 5 instruments") {
  const Dataset d = load_csv(testing::fixture("mouse_synthetic.csv"), load_schema(testing::fixture("mouse_synthetic.schema.json")));
  CHECK(d.n() == 227);
  CHECK(d.p() == 17);
  CHECK(d.r() == 5);
}

TEST_CASE("NaN cell is rejected with its line and column") {
  const auto path = write_file("nan.csv", "y,x1,x2\n1,2,3\n4,NaN,6\n");
  try {
    load_csv(path, xy_schema());
    FAIL("expected an InputError");
  } catch (const InputError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 3") != std::string::npos);
    CHECK(msg.find("'x1'") != std::string::npos);
    CHECK(msg.find("NaN") != std::string::npos);
  }
}

TEST_CASE("malformed inputs are input errors") {
  CHECK_THROWS_AS(load_csv(write_file("ragged.csv", "y,x1,x2\n1,2\n"), xy_schema()), InputError);
  CHECK_THROWS_AS(load_csv(write_file("text.csv", "y,x1,x2\n1,abc,3\n"), xy_schema()), InputError);
  CHECK_THROWS_AS(load_csv(write_file("nocol.csv", "y,x1\n1,2\n"), xy_schema()), InputError);
  CHECK_THROWS_AS(load_csv(write_file("empty.csv", "y,x1,x2\n"), xy_schema()), InputError);
  CHECK_THROWS_AS(load_csv((testing::scratch_dir() / "does_not_exist.csv").string(), xy_schema()), InputError);
  CHECK_THROWS_AS(load_schema(write_file("bad.json", "{\"outcome\": 3}")), InputError);
}

TEST_CASE("dataset constructor validates shapes and finiteness") {
  VectorXd y = VectorXd::Ones(3);
  MatrixXd x = MatrixXd::Ones(3, 2);
  CHECK_NOTHROW(Dataset(y, x));
  CHECK_THROWS_AS(Dataset(y, MatrixXd::Ones(4, 2)), InputError);
  CHECK_THROWS_AS(Dataset(y, MatrixXd::Ones(3, 0)), InputError);
  CHECK_THROWS_AS(Dataset(y, x, MatrixXd::Ones(2, 1)), InputError);
  CHECK_THROWS_AS(Dataset(y, x, MatrixXd::Ones(3, 0)), InputError);
  MatrixXd bad = x;
  bad(1, 1) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(Dataset(y, bad), InputError);
}

TEST_CASE("two-point centering") {
  const Dataset d((VectorXd(2) << 1, 3).finished(), (MatrixXd(2, 1) << 5, 5).finished());
  auto [c, info] = center(d);
  CHECK(info.y_mean == doctest::Approx(2.0));
  CHECK(c.y()(0) == doctest::Approx(-1.0));
  CHECK(c.y()(1) == doctest::Approx(1.0));
  // constant column becomes zero, its mean is recorded
  CHECK(c.x().cwiseAbs().maxCoeff() == 0.0);
  CHECK(info.x_mean(0) == 5.0);
}

TEST_CASE("centering needs two rows") {
  const Dataset d(VectorXd::Ones(1), MatrixXd::Ones(1, 1));
  CHECK_THROWS_AS(center(d), InputError);
}

TEST_CASE("csv write then load reproduces the data") {
  const Dataset d(testing::random_normal(20, 1, 1).col(0), testing::random_normal(20, 3, 2), testing::random_normal(20, 2, 3),
                  testing::random_normal(20, 1, 4));
  const auto path = (testing::scratch_dir() / "roundtrip.csv").string();
  write_csv(path, d);
  CsvSchema s{"y", {"x1", "x2", "x3"}, {"z1", "z2"}, {"w1"}};
  const Dataset back = load_csv(path, s);
  CHECK((back.x() - d.x()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.z() - d.z()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.w() - d.w()).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.y() - d.y()).cwiseAbs().maxCoeff() == 0.0);
}

}  // TEST_SUITE

TEST_SUITE("properties") {

TEST_CASE("centered columns have mean zero and centering is idempotent") {
  const Dataset d(testing::random_normal(50, 1, 5).col(0).array() + 3.0, (testing::random_normal(50, 4, 6).array() * 100.0 + 7.0).matrix(),
                  testing::random_normal(50, 2, 7));
  const Dataset c = center(d).first;
  const double scale = d.x().cwiseAbs().maxCoeff();
  CHECK(c.x().colwise().mean().cwiseAbs().maxCoeff() <= 1e-12 * scale);
  CHECK(std::abs(c.y().mean()) <= 1e-12 * d.y().cwiseAbs().maxCoeff());
  CHECK(c.z().colwise().mean().cwiseAbs().maxCoeff() <= 1e-12 * d.z().cwiseAbs().maxCoeff());
  const Dataset cc = center(c).first;
  CHECK((cc.x() - c.x()).cwiseAbs().maxCoeff() <= 1e-12 * scale);
}

TEST_CASE("center then uncenter restores the data") {
  const Dataset d(testing::random_normal(40, 1, 8).col(0), (testing::random_normal(40, 3, 9).array() + 50.0).matrix(),
                  testing::random_normal(40, 2, 10), testing::random_normal(40, 2, 11));
  auto [c, info] = center(d);
  const Dataset back = uncenter(c, info);
  auto rel = [](const MatrixXd& a, const MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff(); };
  CHECK(rel(back.x(), d.x()) <= 1e-12);
  CHECK(rel(back.y(), d.y()) <= 1e-12);
  CHECK(rel(back.z(), d.z()) <= 1e-12);
  CHECK(rel(back.w(), d.w()) <= 1e-12);
}

TEST_CASE("row selection keeps row order across blocks") {
  const Dataset d(testing::random_normal(10, 1, 12).col(0), testing::random_normal(10, 2, 13), testing::random_normal(10, 1, 14));
  const std::vector<Index> idx{3, 3, 0, 9};
  const Dataset s = d.rows(idx);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    CHECK(s.y()(static_cast<Index>(i)) == d.y()(idx[i]));
    CHECK(s.x().row(static_cast<Index>(i)) == d.x().row(idx[i]));
    CHECK(s.z().row(static_cast<Index>(i)) == d.z().row(idx[i]));
  }
}

}  // TEST_SUITE

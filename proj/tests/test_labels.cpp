#include <doctest.h>

#include <sstream>

#include "diffprobe/error.hpp"
#include "diffprobe/labels.hpp"

using namespace diffprobe;

TEST_CASE("labels CSV parses ratings and source") {
    std::istringstream in("problem_id,rating,source\r\np1,1.5,human\np2,-0.25,human\n");
    const auto labels = read_labels_csv(in, "amc");
    CHECK(labels.dataset_name == "amc");
    CHECK(labels.source == LabelSource::human);
    CHECK(labels.ratings.at("p1") == 1.5);
    CHECK(labels.ratings.at("p2") == -0.25);

    std::ostringstream out;
    write_labels_csv(labels, out);
    CHECK(out.str() == "problem_id,rating,source\np1,1.5,human\np2,-0.25,human\n");
}

TEST_CASE("labels CSV errors") {
    std::istringstream bad_header("id,rating,source\np1,1,human\n");
    CHECK_THROWS_AS(read_labels_csv(bad_header, "x"), FormatError);
    std::istringstream mixed("problem_id,rating,source\np1,1,human\np2,2,llm\n");
    CHECK_THROWS_AS(read_labels_csv(mixed, "x"), FormatError);
    std::istringstream constant("problem_id,rating,source\np1,1,llm\np2,1,llm\n");
    CHECK_THROWS_WITH(read_labels_csv(constant, "x"), "difficulty labels need at least 2 distinct ratings");
    std::istringstream comma_decimal("problem_id,rating,source\np1,1;5,llm\n");
    CHECK_THROWS_AS(read_labels_csv(comma_decimal, "x"), Error);
}

TEST_CASE("label_vector orders by problem ids and lists missing ids") {
    DifficultyLabels labels;
    labels.ratings = {{"a", 1.0}, {"b", 2.0}, {"c", 3.0}};
    const Eigen::VectorXd y = label_vector(labels, {"c", "a"});
    CHECK(y(0) == 3.0);
    CHECK(y(1) == 1.0);
    CHECK_THROWS_WITH(label_vector(labels, {"a", "x", "y"}), "labels missing for 2 problem(s): x, y");
}

#include "chapterkit/config.hpp"

#include <cstdlib>
#include <filesystem>

#include "doctest.h"

#include "chapterkit/errors.hpp"
#include "chapterkit/io.hpp"

using namespace chapterkit;

TEST_CASE("config file: sections, scalars, arrays, comments") {
    std::string text =
        "# top comment\n"
        "[paths]\n"
        "output_dir = \"out\"   # trailing comment\n"
        "[filter]\n"
        "containment_threshold = 0.75\n"
        "drop_labels = [\"page_header\", \"caption\"]\n"
        "[run]\n"
        "seed = 1234\n"
        "verbose = true\n"
        "name = 'literal # not comment'\n";
    auto cfg = ConfigFile::parse(text, "test.toml");
    CHECK(cfg.get_string("paths.output_dir", "") == "out");
    CHECK(cfg.get_double("filter.containment_threshold", 0) == 0.75);
    CHECK(cfg.get_string_array("filter.drop_labels", {}) ==
          std::vector<std::string>{"page_header", "caption"});
    CHECK(cfg.get_int("run.seed", 0) == 1234);
    CHECK(cfg.get_bool("run.verbose", false));
    CHECK(cfg.get_string("run.name", "") == "literal # not comment");
    CHECK(cfg.get_int("run.missing", 7) == 7);
    CHECK(cfg.has("run.seed"));
    CHECK(!cfg.has("run.nothing"));
}

TEST_CASE("config file: parse and type errors") {
    CHECK_THROWS_AS(ConfigFile::parse("[unterminated\n", "t"), ParseError);
    CHECK_THROWS_AS(ConfigFile::parse("key value\n", "t"), ParseError);
    CHECK_THROWS_AS(ConfigFile::parse("key =\n", "t"), ParseError);
    auto cfg = ConfigFile::parse("[a]\nx = \"str\"\n", "t");
    CHECK_THROWS_AS(cfg.get_int("a.x", 0), ConfigError);
    CHECK_THROWS_AS(cfg.get_bool("a.x", false), ConfigError);
}

TEST_CASE("pipeline config: defaults, relative paths, validation") {
    auto dir = std::filesystem::temp_directory_path() / "chapterkit-config-test";
    std::filesystem::create_directories(dir / "corpus");
    write_file_atomic(dir / "corpus" / "manifest.csv", "doc_id,department,page_count\n");
    write_file_atomic(dir / "run.toml",
                      "[paths]\n"
                      "corpus_manifest = \"corpus/manifest.csv\"\n"
                      "output_dir = \"out\"\n"
                      "[classifier]\n"
                      "epochs = 5\n"
                      "[run]\n"
                      "seed = 99\n");
    auto cfg = PipelineConfig::load(dir / "run.toml");
    CHECK(cfg.seed == 99);
    CHECK(cfg.classifier.train.epochs == 5);
    CHECK(cfg.classifier.top_k == 3);
    CHECK(cfg.prompt.generation.temperature == 0.001);
    CHECK(cfg.filter.containment_threshold == 0.5);
    CHECK(cfg.filter.drop_labels.count(RegionLabel::kPageHeader) == 1);
    CHECK(cfg.paths.corpus_manifest == dir / "corpus" / "manifest.csv");

    CHECK_NOTHROW(cfg.require_paths({"corpus_manifest", "output_dir"}));
    CHECK_THROWS_AS(cfg.require_paths({"taxonomy"}), ConfigError);

    write_file_atomic(dir / "bad.toml", "[filter]\ndrop_labels = [\"nonsense\"]\n");
    CHECK_THROWS_AS(PipelineConfig::load(dir / "bad.toml"), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("pipeline config: endpoint environment overrides") {
    auto dir = std::filesystem::temp_directory_path() / "chapterkit-config-env";
    std::filesystem::create_directories(dir);
    write_file_atomic(dir / "run.toml",
                      "[backends]\n"
                      "generation_endpoint = \"http://cfg:1/g\"\n");
    setenv("CHAPTERKIT_GENERATION_ENDPOINT", "http://env:2/g", 1);
    auto cfg = PipelineConfig::load(dir / "run.toml");
    CHECK(cfg.backends.generation_endpoint == "http://env:2/g");
    unsetenv("CHAPTERKIT_GENERATION_ENDPOINT");
    auto cfg2 = PipelineConfig::load(dir / "run.toml");
    CHECK(cfg2.backends.generation_endpoint == "http://cfg:1/g");
    std::filesystem::remove_all(dir);
}

#include <gtest/gtest.h>

#include <random>

#include "pina_xmc/ingest.hpp"
#include "test_util.hpp"

using namespace pina_xmc;

namespace {

std::string error_text(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.what();
    }
    return "";
}

Dataset random_dataset(std::mt19937_64& rng) {
    const std::size_t n = rng() % 15, l = 1 + rng() % 10, d = rng() % 12;
    Dataset ds;
    ds.y = testutil::random_sparse(rng, n, l, 0.25, true);
    if (d > 0) ds.features = testutil::random_sparse(rng, n, d, 0.3);
    if (rng() % 2) {
        for (std::size_t i = 0; i < n; ++i) {
            std::string doc = rng() % 5 == 0 ? "" : "doc " + std::to_string(i) + " caf\xC3\xA9\t tab";
            ds.instances.push_back(doc);
        }
    }
    if (rng() % 2) {
        for (std::size_t c = 0; c < l; ++c) ds.labels.push_back("label " + std::to_string(c));
    }
    return ds;
}

}  // namespace

TEST(Parse, HeaderExample) {
    testutil::TempDir dir("parse");
    io::write_file(dir / "f.txt", "2 3 2\n0 0:1.0\n1 2:0.5\n");
    const auto ds = parse_xmc_dataset(dir / "f.txt");
    EXPECT_EQ(to_dense(ds.y), (std::vector<std::vector<float>>{{1, 0}, {0, 1}}));
    ASSERT_TRUE(ds.features.has_value());
    EXPECT_EQ(to_dense(*ds.features), (std::vector<std::vector<float>>{{1, 0, 0}, {0, 0, 0.5f}}));
    EXPECT_TRUE(ds.instances.empty());
}

TEST(Parse, EmptyLabelFieldAndMultipleLabels) {
    testutil::TempDir dir("parse_empty");
    io::write_file(dir / "f.txt", "3 2 3\n 1:2\n2,0,2 0:1\n\n");
    const auto ds = parse_xmc_dataset(dir / "f.txt");
    EXPECT_EQ(to_dense(ds.y), (std::vector<std::vector<float>>{{0, 0, 0}, {1, 0, 1}, {0, 0, 0}}));
    EXPECT_EQ(ds.features->at(0, 1), 2.0f);
}

TEST(Parse, CrlfAndTextFiles) {
    testutil::TempDir dir("parse_text");
    io::write_file(dir / "f.txt", "2 0 2\r\n0\r\n1\r\n");
    io::write_file(dir / "l.txt", "first label\r\nsecond\r\n");
    io::write_file(dir / "i.txt", "doc one\n\n");
    const auto ds = parse_xmc_dataset(dir / "f.txt", dir / "l.txt", dir / "i.txt");
    EXPECT_FALSE(ds.features.has_value());
    EXPECT_EQ(ds.labels, (Corpus{"first label", "second"}));
    EXPECT_EQ(ds.instances, (Corpus{"doc one", ""}));
}

TEST(Parse, ErrorsCarryLineNumbers) {
    testutil::TempDir dir("parse_err");
    auto check = [&](const std::string& content, const std::string& needle) {
        io::write_file(dir / "f.txt", content);
        const auto msg = error_text([&] { parse_xmc_dataset(dir / "f.txt"); });
        EXPECT_NE(msg.find(needle), std::string::npos) << "got: " << msg;
    };
    check("", ":0: missing header");
    check("2 3\n", ":1: malformed header");
    check("1 3 2\n0 x:1\n", ":2: bad feature");
    check("1 3 2\n5 0:1\n", ":2: label id 5 >= L=2");
    check("2 3 2\n0 0:1\n1 3:1\n", ":3: feature id 3 >= D=3");
    check("2 3 2\n0 0:1\n", "file ends early");
    check("1 3 2\n0 0:1\nextra\n", ":3: unexpected content");
    check("1 3 2\n0 0:1,5\n", "bad feature");
    check("1 3 2\n0,a 0:1\n", "bad label id");
}

TEST(Parse, LabelIdOutOfRangeIsFormatError) {
    testutil::TempDir dir("parse_l");
    io::write_file(dir / "f.txt", "1 1 2\n2 0:1\n");
    try {
        parse_xmc_dataset(dir / "f.txt");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::format);
    }
}

TEST(Parse, InvalidUtf8Rejected) {
    testutil::TempDir dir("parse_utf");
    io::write_file(dir / "f.txt", "1 0 1\n0\n");
    for (const std::string bad : {"\xC3\n", "\xC0\xAF\n", "\xED\xA0\x80\n", "\xF4\x90\x80\x80\n", "\xFF\n"}) {
        io::write_file(dir / "l.txt", bad);
        EXPECT_THROW(parse_xmc_dataset(dir / "f.txt", dir / "l.txt"), Error) << testing::PrintToString(bad);
    }
    io::write_file(dir / "l.txt", "\xF0\x9F\x99\x82 ok\n");
    EXPECT_EQ(parse_xmc_dataset(dir / "f.txt", dir / "l.txt").labels[0], "\xF0\x9F\x99\x82 ok");
}

TEST(Parse, TextLineCountMismatch) {
    testutil::TempDir dir("parse_count");
    io::write_file(dir / "f.txt", "2 0 1\n0\n0\n");
    io::write_file(dir / "i.txt", "only one\n");
    EXPECT_THROW(parse_xmc_dataset(dir / "f.txt", std::nullopt, dir / "i.txt"), Error);
    EXPECT_THROW(parse_xmc_dataset(dir / "missing.txt"), Error);
}

TEST(RoundTrip, FuzzedDatasets) {
    std::mt19937_64 rng(51);
    testutil::TempDir dir("rt");
    for (int rep = 0; rep < 200; ++rep) {
        auto ds = random_dataset(rng);
        ds.split = "rt";
        write_dataset(ds, dir / "rt");
        const auto back = load_dataset(dir / "rt");
        ASSERT_EQ(back, ds) << format_features(ds);
        std::filesystem::remove_all(dir / "rt");
    }
}

TEST(RoundTrip, IdenticalBytes) {
    std::mt19937_64 rng(52);
    const auto ds = random_dataset(rng);
    testutil::TempDir a("rt_a");
    testutil::TempDir b("rt_b");
    write_dataset(ds, a / "x");
    write_dataset(ds, b / "x");
    for (const auto& e : std::filesystem::directory_iterator(a / "x")) {
        EXPECT_EQ(testutil::slurp(e.path()), testutil::slurp(b / "x" / e.path().filename()));
    }
    // parse then write reproduces canonical bytes
    const auto canon = testutil::slurp(a / "x" / "features.txt");
    EXPECT_EQ(format_features(load_dataset(a / "x")), canon);
}

TEST(RoundTrip, CanonicalOrdering) {
    testutil::TempDir dir("canon");
    io::write_file(dir / "f.txt", "1 4 3\n2,0,2 3:0.25 1:1e-1\n");
    const auto ds = parse_xmc_dataset(dir / "f.txt");
    EXPECT_EQ(format_features(ds), "1 4 3\n0,2 1:0.1 3:0.25\n");
}

TEST(Write, RejectsLineBreakInText) {
    Dataset ds;
    ds.y = SparseMatrix(1, 1);
    ds.instances = {"two\nlines"};
    testutil::TempDir dir("nl");
    EXPECT_THROW(write_dataset(ds, dir.path()), Error);
    ds.instances = {"ok"};
    ds.labels = {"a", "b"};
    EXPECT_THROW(write_dataset(ds, dir.path()), Error);
}

TEST(Dataset, ValidateShapes) {
    Dataset ds;
    ds.y = SparseMatrix(2, 1);
    ds.features = SparseMatrix(3, 4);
    EXPECT_THROW(ds.validate(), Error);
    ds.features.reset();
    ds.instances = {"a"};
    EXPECT_THROW(ds.validate(), Error);
    ds.instances = {"a", "b"};
    EXPECT_NO_THROW(ds.validate());
}

#include "mewls/data.hpp"
#include "mewls/io/csv.hpp"
#include "mewls/io/field.hpp"
#include "mewls/io/png.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace mewls;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "mewls_test_io";
    fs::create_directories(dir);
    return dir / name;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST(Csv, ScatteredRoundTripIsExact) {
    SyntheticConfig cfg;
    cfg.n_clean = 50;
    cfg.n_outliers = 5;
    const auto ds = generate_franke_dataset(cfg).data;
    const auto path = scratch("scattered.csv");
    io::write_dataset_csv(path.string(), ds);
    const auto back = io::read_dataset_csv(path.string());
    EXPECT_EQ(back.layout, Layout::scattered);
    EXPECT_EQ(back.u, ds.u);
    EXPECT_EQ(back.v, ds.v);
    EXPECT_EQ(back.Q, ds.Q);
    EXPECT_EQ(slurp(path).substr(0, 7), "u,v,q1\n");
}

TEST(Csv, StructuredRoundTripIsExact) {
    const auto ds = generate_sphere_dataset({}).data;
    const auto path = scratch("sphere.csv");
    io::write_dataset_csv(path.string(), ds);
    const auto back = io::read_dataset_csv(path.string());
    EXPECT_EQ(back.layout, Layout::structured);
    EXPECT_EQ(back.u, ds.u);
    EXPECT_EQ(back.v, ds.v);
    EXPECT_EQ(back.Q, ds.Q);
    EXPECT_EQ(slurp(path).substr(0, 20), "structured,15,12,3\nu");
}

TEST(Csv, WritesAreDeterministic) {
    const auto ds = generate_sphere_dataset({}).data;
    const auto a = scratch("a.csv");
    const auto b = scratch("b.csv");
    io::write_dataset_csv(a.string(), ds);
    io::write_dataset_csv(b.string(), generate_sphere_dataset({}).data);
    EXPECT_EQ(slurp(a), slurp(b));
}

TEST(Csv, MalformedInputRejected) {
    const auto p = scratch("bad.csv");
    {
        std::ofstream(p) << "x,y,z\n1,2,3\n";
    }
    EXPECT_THROW(io::read_dataset_csv(p.string()), InvalidInput);
    {
        std::ofstream(p) << "u,v,q1\n0.1,0.2\n";
    }
    EXPECT_THROW(io::read_dataset_csv(p.string()), InvalidInput);
    {
        std::ofstream(p) << "u,v,q1\n0.1,abc,0.3\n";
    }
    EXPECT_THROW(io::read_dataset_csv(p.string()), InvalidInput);
    {
        std::ofstream(p) << "structured,2,2,1\nu,0,1\nv,0,1\n1\n2\n3\n";
    }
    EXPECT_THROW(io::read_dataset_csv(p.string()), InvalidInput);
    EXPECT_THROW(io::read_dataset_csv("/nonexistent/dir/file.csv"), io::IoError);
    EXPECT_THROW(io::write_dataset_csv("/nonexistent/dir/file.csv", generate_sphere_dataset({}).data),
                 io::IoError);
}

TEST(Csv, Table) {
    io::CsvTable t({"r", "rho"});
    t.add_row({1.0, 0.0});
    t.add_row({2.0, 0.125});
    EXPECT_THROW(t.add_row({1.0}), InvalidInput);
    const auto p = scratch("table.csv");
    t.write(p.string());
    EXPECT_EQ(slurp(p), "r,rho\n1,0\n2,0.125\n");
}

TEST(Png, GrayAndRgbRoundTrip) {
    for (int channels : {1, 3}) {
        ImageGrid img(17, 9, channels);
        for (std::size_t i = 0; i < img.values.size(); ++i) img.values[i] = static_cast<double>(i % 256) / 255.0;
        const auto p = scratch("img" + std::to_string(channels) + ".png");
        io::write_png(p.string(), img);
        const auto back = io::read_png(p.string());
        EXPECT_EQ(back.width, 17);
        EXPECT_EQ(back.height, 9);
        EXPECT_EQ(back.channels, channels);
        for (std::size_t i = 0; i < img.values.size(); ++i) EXPECT_NEAR(back.values[i], img.values[i], 1e-12);
    }
}

TEST(Png, MaskRoundTrip) {
    OutlierMask m{5, 4, std::vector<std::uint8_t>(20, 0)};
    m.flags[3] = 1;
    m.flags[17] = 1;
    const auto p = scratch("mask.png");
    io::write_png(p.string(), io::mask_to_image(m));
    EXPECT_EQ(io::image_to_mask(io::read_png(p.string())).flags, m.flags);
}

TEST(Png, Errors) {
    const auto p = scratch("notpng.png");
    {
        std::ofstream(p) << "definitely not a png";
    }
    EXPECT_THROW(io::read_png(p.string()), io::IoError);
    EXPECT_THROW(io::read_png("/nonexistent/x.png"), io::IoError);
    EXPECT_THROW(io::write_png(scratch("two.png").string(), ImageGrid(3, 3, 2)), InvalidInput);
}

TEST(FieldCsv, RoundTripAndValidation) {
    ScalarField f{3, 2, {0.5, 1e-300, 0.0, 1.0, 2.5, 0.125}};
    const auto p = scratch("field.csv");
    io::write_field_csv(p.string(), f);
    const auto back = io::read_field_csv(p.string());
    EXPECT_EQ(back.width, 3);
    EXPECT_EQ(back.height, 2);
    EXPECT_EQ(back.values, f.values);
    {
        std::ofstream(p) << "x,y,w\n0,0,1\n1,0,2\n0,0,3\n1,1,4\n";
    }
    EXPECT_THROW(io::read_field_csv(p.string()), InvalidInput);
    {
        std::ofstream(p) << "x,y,w\n0,0,1\n1,0,2\n";
    }
    EXPECT_EQ(io::read_field_csv(p.string()).width, 2);
    {
        std::ofstream(p) << "x,y,w\n0.5,0,1\n";
    }
    EXPECT_THROW(io::read_field_csv(p.string()), InvalidInput);
}

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "polyct/system_matrix.hpp"

namespace polyct {

// Parallel-beam scanner: n_views angles evenly spaced in [0, pi), n_cells
// detector cells spanning the grid diagonal.
struct ParallelBeamGeometry {
    std::size_t n_views = 50;
    std::size_t n_cells = 50;
    std::size_t grid_side = 25;
    double pixel_size = 1.0 / 25.0;

    void validate() const;
    std::size_t rays() const noexcept { return n_views * n_cells; }
    double extent() const noexcept { return static_cast<double>(grid_side) * pixel_size; }

    struct Ray {
        double ox, oy;  // point on the ray closest to the grid center
        double dx, dy;  // unit direction
    };
    // Row i is (view i / n_cells, cell i % n_cells).
    Ray ray(std::size_t i) const;
};

ParallelBeamGeometry default_geometry(std::size_t n_views = 50, std::size_t grid_side = 25);

// Exact ray-pixel intersection lengths. Pixel k = r * side + c where r grows
// with y and c grows with x.
SystemMatrix build_radon_matrix(const ParallelBeamGeometry& geom);

// Length of the part of a ray inside the square grid.
double chord_length(const ParallelBeamGeometry& geom, std::size_t i);

SystemMatrix build_gaussian_matrix(std::size_t n, std::size_t d, std::uint64_t seed);

struct Image {
    std::size_t side = 0;
    Vec values;

    double& at(std::size_t r, std::size_t c) { return values[r * side + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * side + c]; }
};

// Square image of zeros holding side * side pixels.
Image blank_image(std::size_t side);

// Circle in pixel units, measured from the image center.
struct Disc {
    double cx = 0.0;
    double cy = 0.0;
    double radius = 0.0;
    double density = 0.0;

    bool contains(double x, double y) const;
};

// Pixel center of (r, c) in pixel units relative to the image center.
double pixel_x(std::size_t side, std::size_t c);
double pixel_y(std::size_t side, std::size_t r);

// Unit disc of radius 0.45 side with four ROIs of densities 0.5, 0.8, 1.2, 1.5.
Image make_pmma_phantom(std::size_t grid_side);
std::vector<Disc> pmma_rois(std::size_t grid_side);

// Mean pixel value over the pixels whose centers fall inside the disc.
double region_mean(const Image& image, const Disc& region);

// Known water disc and bone ring around an unknown iodine image.
struct ContrastScenario {
    std::size_t side = 0;
    Image water;
    Image bone;
    Image iodine;
    std::vector<Disc> iodine_rois;
    Vec water_attenuation;
    Vec bone_attenuation;
    Vec iodine_attenuation;

    // Row-major n_rows x W table of sum_m mu_{m,j} <a_i, x_m>.
    Vec background_exponents(const SystemMatrix& A) const;
};

// background_scale multiplies both known densities; 0 gives a scenario with
// no known material at all.
ContrastScenario make_contrast_scenario(std::size_t grid_side, std::size_t bins = 50,
                                        double background_scale = 1.0);

} // namespace polyct

#include "support.hpp"

#include <numbers>

#include "hemosynth/image_ops.hpp"
#include "hemosynth/phantom.hpp"
#include "hemosynth/volume_ops.hpp"

using namespace hemosynth;
using testing::error_kind;

namespace {

PhantomParams small_params(std::uint64_t seed = 5) {
  PhantomParams p;
  p.dims = {64, 64, 64};
  p.seed = seed;
  return p;
}

}  // namespace

TEST_SUITE("phantom") {
  TEST_CASE("same seed gives identical phantoms, different seeds differ") {
    const Phantom a = generate_phantom(small_params(5)), b = generate_phantom(small_params(5));
    CHECK((a.volume.voxels == b.volume.voxels).all());
    CHECK((a.labels.voxels == b.labels.voxels).all());
    const Phantom c = generate_phantom(small_params(6));
    CHECK((a.labels.voxels == c.labels.voxels).all());
    CHECK_FALSE((a.volume.voxels == c.volume.voxels).all());
  }

  TEST_CASE("noise-free ventricles have the nominal intensity") {
    PhantomParams p = small_params();
    p.noise_sd = 0.0;
    const Phantom ph = generate_phantom(p);
    const Mask3 vent = class_mask(ph.labels, TissueClass::Ventricles);
    REQUIRE((vent.voxels != 0).count() > 0);
    for (Eigen::Index i = 0; i < vent.size(); ++i)
      if (vent.voxels[i]) CHECK(ph.volume.voxels[i] == 0.90f);
  }

  TEST_CASE("ventricle volume matches the analytic ellipsoids") {
    PhantomParams p;
    const Phantom ph = generate_phantom(p);
    const double voxel = p.spacing.prod();
    const double analytic = (p.ventricle(true).volume() + p.ventricle(false).volume()) * voxel;
    const double measured = tissue_volume(ph.labels, TissueClass::Ventricles);
    CHECK(std::abs(measured - analytic) / analytic < 0.05);
    const Ellipsoid e = p.ventricle(true);
    CHECK(e.volume() == doctest::Approx(4.0 / 3.0 * std::numbers::pi * e.semi_axes.prod()));
  }

  TEST_CASE("every tissue class of the model appears and labels nest") {
    const Phantom ph = generate_phantom(small_params());
    for (TissueClass c : {TissueClass::ExternalCSF, TissueClass::GrayMatter, TissueClass::WhiteMatter,
                          TissueClass::Ventricles, TissueClass::DeepGrayMatter})
      CHECK(tissue_volume(ph.labels, c) > 0.0);
    for (Eigen::Index i = 0; i < ph.labels.size(); ++i)
      if (ph.labels.voxels[i] == 0) CHECK(ph.volume.voxels[i] == 0.0f);
    CHECK(ph.volume.voxels.minCoeff() >= 0.0f);
    CHECK(ph.volume.voxels.maxCoeff() <= 1.0f);
  }

  TEST_CASE("parameter validation") {
    PhantomParams p = small_params();
    p.noise_sd = -1.0;
    CHECK(error_kind([&] { generate_phantom(p); }) == ErrorKind::Parameter);
    p = small_params();
    p.brain_axes = {0.6, 0.4, 0.4};
    CHECK(error_kind([&] { generate_phantom(p); }) == ErrorKind::Parameter);
    p = small_params();
    p.ventricle_offset = {0.0, 0.0, 0.0};
    CHECK(error_kind([&] { generate_phantom(p); }) == ErrorKind::Parameter);
    p = small_params();
    p.dims = {0, 64, 64};
    CHECK(error_kind([&] { generate_phantom(p); }) == ErrorKind::Parameter);
  }

  TEST_CASE("injected lesions stay inside the brain, darken, and respect the scenario") {
    const Phantom ph = generate_phantom(small_params());
    const Mask3 brain = brain_mask(ph.labels);
    const auto roi_z = roi_slice_indices(ph.labels, Plane::Axial);
    for (int scenario = 1; scenario <= 4; ++scenario) {
      SynthesisConfig cfg;
      cfg.scenario_probs = {0.0, 0.0, 0.0, 0.0};
      cfg.scenario_probs[std::size_t(scenario - 1)] = 1.0;
      for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const InjectedLesion les = inject_lesion_3d(ph.volume, ph.labels, cfg, seed);
        CHECK(int(les.scenario) == scenario);
        CHECK(les.attenuation >= 0.3);
        CHECK(les.attenuation <= 0.5);
        std::size_t n = 0;
        double hard_ratio = 0.0;
        for (int z = 0; z < ph.labels.dims[2]; ++z)
          for (int y = 0; y < ph.labels.dims[1]; ++y)
            for (int x = 0; x < ph.labels.dims[0]; ++x) {
              const float before = ph.volume(x, y, z), after = les.volume(x, y, z);
              CHECK(after <= before);
              if (!les.mask(x, y, z)) {
                CHECK(after == before);
                continue;
              }
              ++n;
              CHECK(brain(x, y, z));
              CHECK(std::binary_search(roi_z.begin(), roi_z.end(), z));
              const auto label = ph.labels(x, y, z);
              if (scenario == 2) CHECK(label != code(TissueClass::DeepGrayMatter));
              if (scenario == 3) CHECK(label != code(TissueClass::Ventricles));
              if (scenario == 4) CHECK(label == code(TissueClass::WhiteMatter));
              if (before > 0.0f) {
                // Before the boundary blur every mask voxel is scaled by exactly f.
                hard_ratio += double(float(double(before) * les.attenuation)) / double(before);
                if (les.alpha(x, y, z) == 1.0f) CHECK(double(after) / double(before) == doctest::Approx(les.attenuation).epsilon(1e-6));
              }
            }
        REQUIRE(n > 0);
        CHECK(hard_ratio / double(n) >= 0.3 - 1e-6);
        CHECK(hard_ratio / double(n) <= 0.5 + 1e-6);
        CHECK(largest_component(les.mask).voxels.cast<int>().sum() == les.mask.voxels.cast<int>().sum());
      }
    }
  }

  TEST_CASE("injection is deterministic and fails loudly when no candidate fits") {
    const Phantom ph = generate_phantom(small_params());
    const SynthesisConfig cfg;
    const InjectedLesion a = inject_lesion_3d(ph.volume, ph.labels, cfg, 77), b = inject_lesion_3d(ph.volume, ph.labels, cfg, 77);
    CHECK((a.mask.voxels == b.mask.voxels).all());
    CHECK((a.volume.voxels == b.volume.voxels).all());

    Lesion3DParams huge;
    huge.min_voxels = 64 * 64 * 64;
    CHECK(error_kind([&] { inject_lesion_3d(ph.volume, ph.labels, cfg, 1, huge); }) == ErrorKind::InjectionFailed);
  }

  TEST_CASE("grade mapping") {
    CHECK(grade_for_scenario(HemorrhageScenario::DGMOnly) == PapileGrade::I);
    CHECK(grade_for_scenario(HemorrhageScenario::VentriclesOnly) == PapileGrade::II);
    CHECK(grade_for_scenario(HemorrhageScenario::DilatedVentDGM) == PapileGrade::III);
    CHECK(grade_for_scenario(HemorrhageScenario::HemisphericWM) == PapileGrade::IV);
  }
}

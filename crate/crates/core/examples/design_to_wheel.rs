//! Turns one topology-optimized 2D design into a voxel wheel and, optionally,
//! runs the free-free modal analysis on it.
//!
//! cargo run --example design_to_wheel -- [lambda] [shear_ratio] [--modal]

use std::time::Instant;

use wheelforge::contour::{extract_contours, ContourConfig};
use wheelforge::designspace::{synth_reference, ReferenceParams};
use wheelforge::modal::{analyze_solid, Material, ModalSettings};
use wheelforge::solid::{build_wheel, CrossSection, WheelBuildSpec};
use wheelforge::topopt::{sweep, DomainSpec, SweepLevels, TopOptSettings};

fn main() -> wheelforge::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let nums: Vec<f64> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let lambda = nums.first().copied().unwrap_or(0.05);
    let shear = nums.get(1).copied().unwrap_or(0.2);
    let modal = args.iter().any(|a| a == "--modal");

    let reference = synth_reference(&ReferenceParams::default(), 64, "ref")?;
    let levels = SweepLevels {
        lambda: vec![lambda],
        shear_ratio: vec![shear],
        vol_frac: vec![1.0],
    };
    let t = Instant::now();
    let out = sweep(&reference, &levels, &DomainSpec::default(), &TopOptSettings::default())?;
    let design = &out.set.items()[0];
    println!("topopt: {} ({:.1}s)", out.rows[0].status, t.elapsed().as_secs_f64());

    let (sketch, trace) = extract_contours(design, &ContourConfig::default())?;
    println!(
        "contours: {} closed curves, {} points, {:.3} mm/px",
        sketch.groups.len(),
        sketch.point_count(),
        trace.mm_per_px
    );

    let spec = WheelBuildSpec {
        voxel_pitch_mm: 6.0,
        ..WheelBuildSpec::default()
    };
    let t = Instant::now();
    let (solid, report) = build_wheel(&sketch, &CrossSection::default_spoke(), &CrossSection::default_rim(), &spec)?;
    println!(
        "solid: {} voxels, {} component(s), {:.0} cm3 ({:.1}s)",
        report.voxels,
        report.components,
        report.volume_final_mm3 / 1000.0,
        t.elapsed().as_secs_f64()
    );

    if modal {
        let t = Instant::now();
        let r = analyze_solid(&solid, Material::default(), &ModalSettings::default())?;
        println!(
            "modal: {} dofs, mass {:.2} kg, lateral mode {} at {:.1} Hz ({:.1}s)",
            r.n_dofs,
            r.mass_kg,
            r.lateral_index + 1,
            r.lateral_frequency_hz,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}

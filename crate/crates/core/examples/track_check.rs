use puppetgan::domains::{render_glyph, AttributeVector, DomainSpec};
use puppetgan::metrics::{measure_glyph_rotation, measure_size};

fn main() {
    let spec = DomainSpec::synthetic_default(32);
    println!("-- rotation sweep, class 1 --");
    let mut worst: f64 = 0.0;
    for theta in (-40..=40).step_by(5) {
        let p = AttributeVector {
            class_id: 1, rotation_deg: theta as f64, size_scale: 1.0,
            stroke_width: 1.8, offset_xy: (0.0, 0.0),
        };
        let img = render_glyph(&p, &spec, 0).unwrap();
        let m = measure_glyph_rotation(&img.pixels.view()).unwrap();
        let err = (m - theta as f64).abs();
        worst = worst.max(err);
        println!("theta {:>4} measured {:>8.3} err {:.3}", theta, m, err);
    }
    println!("worst rotation err: {worst:.3}");

    println!("-- rotation sweep, all classes --");
    for class in 0..10u8 {
        let mut worst: f64 = 0.0;
        for theta in (-40..=40).step_by(10) {
            let p = AttributeVector {
                class_id: class, rotation_deg: theta as f64, size_scale: 1.0,
                stroke_width: 1.8, offset_xy: (0.0, 0.0),
            };
            let img = render_glyph(&p, &spec, 0).unwrap();
            let m = measure_glyph_rotation(&img.pixels.view()).unwrap();
            worst = worst.max((m - theta as f64).abs());
        }
        println!("class {class}: worst err {worst:.2}");
    }

    println!("-- size sweep, class 1 & 8 --");
    for class in [1u8, 8] {
        let mut xs = vec![]; let mut ys = vec![];
        for i in 0..9 {
            let s = 0.6 + i as f64 * (1.3 - 0.6) / 8.0;
            let p = AttributeVector {
                class_id: class, rotation_deg: 0.0, size_scale: s,
                stroke_width: 1.8, offset_xy: (0.0, 0.0),
            };
            let img = render_glyph(&p, &spec, 0).unwrap();
            let m = measure_size(&img.pixels.view()).unwrap();
            xs.push(s); ys.push(m);
            println!("class {class} scale {s:.3} size {m:.3} ratio {:.3}", m / s);
        }
        let r = puppetgan::metrics::pearson_r(&xs, &ys).unwrap();
        println!("class {class}: pearson r = {r:.5}");
    }

    // scale doubling: 0.5 vs 1.0
    let mk = |s: f64| {
        let p = AttributeVector { class_id: 8, rotation_deg: 0.0, size_scale: s, stroke_width: 1.4, offset_xy: (0.0,0.0) };
        let mut sp = spec.clone();
        sp.ranges.size_scale = (0.2, 2.0);
        let img = render_glyph(&p, &sp, 0).unwrap();
        measure_size(&img.pixels.view()).unwrap()
    };
    let (a, b) = (mk(0.5), mk(1.0));
    println!("doubling: {a:.3} -> {b:.3}, ratio {:.4}", b / a);
}

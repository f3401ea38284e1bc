//! Prints the analytic model's breakdown for one configuration and the
//! compute/memory threshold of every catalogued GPU.

use skinny_gemm::perfmodel::{model_report, t2_threshold, ModelReport};
use skinny_gemm::{Catalog, KernelParams, KernelVariant, Precision};

fn main() -> skinny_gemm::Result<()> {
    let catalog = Catalog::builtin();
    for profile in catalog.iter() {
        println!("{:<5} t2 threshold {:.1}", profile.spec.name, t2_threshold(&profile.spec, Precision::Double));
    }
    let k40c = catalog.get("k40c")?;
    let p = KernelParams::new(KernelVariant::V3, 128, 16, 4);
    let report = model_report(15360, 15360, 16, &p, &k40c.spec, Precision::Double, &k40c.constants);
    println!();
    for (field, value) in ModelReport::FIELDS.iter().zip(report.values()) {
        println!("{field:>20}  {value}");
    }
    Ok(())
}

fn main() {
    println!("gaplab");
}

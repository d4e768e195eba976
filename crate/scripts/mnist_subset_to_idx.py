"""Convert the 5000-image MNIST subset bundled with mlxtend into IDX files.

Usage: python3 scripts/mnist_subset_to_idx.py <mlxtend wheel or mnist_5k.csv.gz> <out dir>

Get the wheel with `pip download mlxtend --no-deps -d <dir>`.
"""
import gzip
import io
import struct
import sys
import zipfile
from pathlib import Path

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def read_rows(src: Path):
    if src.suffix == ".whl":
        with zipfile.ZipFile(src) as z:
            raw = z.read(MEMBER)
    else:
        raw = src.read_bytes()
    text = gzip.decompress(raw).decode()
    for line in io.StringIO(text):
        line = line.strip()
        if line:
            vals = [int(float(v)) for v in line.split(",")]
            yield vals[:-1], vals[-1]


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    images, labels = [], []
    for pixels, label in read_rows(src):
        assert len(pixels) == 784 and 0 <= label <= 9
        images.append(bytes(pixels))
        labels.append(label)
    n = len(labels)
    with open(out / "train-images-idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 2051, n, 28, 28))
        f.write(b"".join(images))
    with open(out / "train-labels-idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 2049, n))
        f.write(bytes(labels))
    print(f"wrote {n} images to {out}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Download the benchmark datasets into a local data root.

The library's loaders only read local files; this script is the one place
that knows the source URLs. Layout produced:

    <dest>/mnist/{train,t10k}-{images-idx3,labels-idx1}-ubyte.gz
    <dest>/cifar10/cifar-10-batches-bin/{data_batch_1..5,test_batch}.bin
    <dest>/omniglot/{images_background,images_evaluation}/<alphabet>/<character>/*.png

Usage:
    python scripts/fetch_data.py --dest data               # everything
    python scripts/fetch_data.py --dest data --dataset mnist
"""

import argparse
import sys
import tarfile
import urllib.request
import zipfile
from pathlib import Path

MNIST_BASE = "https://ossci-datasets.s3.amazonaws.com/mnist"
MNIST_FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]
CIFAR_URL = "https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz"
OMNIGLOT_ZIPS = [
    "https://raw.githubusercontent.com/brendenlake/omniglot/master/python/images_background.zip",
    "https://raw.githubusercontent.com/brendenlake/omniglot/master/python/images_evaluation.zip",
]


def download(url, dest: Path):
    if dest.exists():
        print(f"  {dest} already present")
        return dest
    print(f"  {url} -> {dest}")
    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_suffix(dest.suffix + ".part")
    urllib.request.urlretrieve(url, tmp)
    tmp.rename(dest)
    return dest


def fetch_mnist(root: Path):
    for name in MNIST_FILES:
        download(f"{MNIST_BASE}/{name}", root / "mnist" / name)


def fetch_cifar10(root: Path):
    archive = download(CIFAR_URL, root / "cifar10" / "cifar-10-binary.tar.gz")
    with tarfile.open(archive) as tar:
        tar.extractall(root / "cifar10")
    print(f"  extracted to {root / 'cifar10' / 'cifar-10-batches-bin'}")


def fetch_omniglot(root: Path):
    for url in OMNIGLOT_ZIPS:
        name = url.rsplit("/", 1)[-1]
        archive = download(url, root / "omniglot" / name)
        with zipfile.ZipFile(archive) as z:
            z.extractall(root / "omniglot")
    print(f"  extracted to {root / 'omniglot'}")


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data", help="data root directory")
    parser.add_argument("--dataset", choices=["mnist", "cifar10", "omniglot", "all"],
                        default="all")
    args = parser.parse_args()
    root = Path(args.dest)
    jobs = {
        "mnist": fetch_mnist,
        "cifar10": fetch_cifar10,
        "omniglot": fetch_omniglot,
    }
    selected = jobs if args.dataset == "all" else {args.dataset: jobs[args.dataset]}
    failures = []
    for name, fn in selected.items():
        print(f"fetching {name}")
        try:
            fn(root)
        except Exception as exc:
            failures.append((name, exc))
            print(f"  FAILED: {exc}")
    if failures:
        print("\nsome downloads failed; fetch the files manually and place them "
              "under the layout in this script's docstring", file=sys.stderr)
        return 1
    print(f"\ndone; point --data-root or $HEBBCL_DATA_ROOT at {root}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

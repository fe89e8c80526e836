"""Parsing interaction logs and splitting them per user into train / validation / test."""
import tempfile
from pathlib import Path

import numpy as np

from ahns.data import load_manifest, parse_interactions, save_manifest, split_dataset

spacer = "_" * 60

tmp = Path(tempfile.mkdtemp())
log = tmp / "ratings.dat"
log.write_text("1::10::5::0\n1::11::2::0\n1::12::4::0\n2::10::3::0\n2::13::5::0\n"
               "3::11::4::0\n3::12::1::0\n3::13::5::0\n3::10::4::0\n1::10::5::9\n")

ds = parse_interactions(log, "movielens-dat")
print("all rows kept as positives (duplicates merged):", ds.num_interactions)
ds4 = parse_interactions(log, "movielens-dat", rating_threshold=4)
print("rating >= 4 only:", ds4.num_interactions)
print("raw user ids -> dense ids:", ds.user_ids, "items:", ds.item_ids)
print(spacer)

man = split_dataset(ds, test_frac=0.2, val_frac_of_train=0.1, seed=0)
for name in ("train", "val", "test"):
    part = man.dataset(name)
    print("%-5s %d pairs" % (name, 0 if part is None else part.num_interactions))
save_manifest(man, tmp / "manifest.txt")
print("manifest round trip equal:", bool(np.array_equal(load_manifest(tmp / "manifest.txt").test, man.test)))

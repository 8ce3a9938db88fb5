"""Detection tests and separation rates for heteroscedastic Gaussian sequences."""

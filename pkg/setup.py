from pathlib import Path
from setuptools import setup


setup(
    name='sparsemf',

    description='Sparsity-constrained optimal control of particle measures',
    long_description=Path("README.rst").read_text(),

    author='sparsemf developers',

    license='Apache',
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: Apache Software License',
        'Programming Language :: Python :: 3 :: Only',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],

    python_requires='>=3.8',
    packages=['sparsemf'],
    entry_points={
        'console_scripts': ['sparsemf = sparsemf.__main__:main']
    },
    include_package_data=True,
    install_requires=[
        'loam>=0.5.0,<0.6',
        'setuptools_scm>=6.3.2',
        'numpy>=1.20',
        'scipy>=1.7',
        'pandas>=1.3',
    ],
    extras_require={
        'tests': ['pytest>=6.0', 'pytest-cov>=2.10', 'hypothesis>=6.0'],
    },
)

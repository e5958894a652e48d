import os

from setuptools import setup

with open('README.rst') as f:
    long_description = f.read()

version = {}
with open(os.path.join('thermocat', '_version.py')) as f:
    exec(f.read(), version)

setup(name='thermocat',
      version=version['__version__'],
      license='BSD',
      description=('Phase-space tools for superpositions of displaced thermal '
                   'states: Wigner functions, fringes and Bell tests'),
      long_description=long_description,
      keywords='wigner thermal cat state bell inequality quantum optics',
      classifiers=['Topic :: Scientific/Engineering :: Physics',
                   'License :: OSI Approved :: BSD License',
                   'Programming Language :: Python',
                   'Programming Language :: Python :: 3'],
      packages=['thermocat', 'thermocat.tests'],
      python_requires='>=3.8',
      install_requires=['numpy>=1.20', 'scipy>=1.7', 'traitlets>=5.0',
                        'pyarrow>=12.0.0'],
      entry_points={
          'console_scripts': ['thermocat = thermocat.app:main']
      })

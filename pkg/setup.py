import re
from setuptools import setup

with open('README.md', 'r') as fh:
    description = fh.read()
    # Patch the relative links so they'll work on PyPI.
    long_description = re.sub(
        r']\(([\w/.-]+)\)',
        r'](https://github.com/molcom-toolkit/molcom/blob/master/\1)',
        description)

setup(
    name='molcom',
    version='0.1.0',
    packages=['molcom', 'molcom.util'],
    url='https://github.com/molcom-toolkit/molcom',
    project_urls={
        'Source': 'https://github.com/molcom-toolkit/molcom',
        'Changelog': 'https://github.com/molcom-toolkit/molcom/blob/master/docs/changes.md',
    },
    license='MIT',
    description='Closed-form bounds and particle simulations of an'
                ' enzyme-assisted diffusive molecular communication channel',
    long_description=long_description,
    long_description_content_type='text/markdown',
    python_requires='>=3.8, <4',
    install_requires=[
        'numpy>=1.20',
        'scipy>=1.6',
        'ruamel.yaml>=0.16.9',
        'matplotlib>=3.3',
    ],
    extras_require={
        'dev': ['pytest>=6.0'],
    },
    package_data={
        'molcom': ['presets/*.yaml'],
    },
    entry_points={
        'console_scripts': [
            'molcom=molcom.cli:cli',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3 :: Only',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Physics',
    ],
    keywords='molecular communication diffusion enzyme simulation',
)

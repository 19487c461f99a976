/** Small seeded PRNG for reproducible test inputs (xoshiro128+ over a
 * splitmix32-expanded seed). Not cryptographic. */

function splitmix32(seed: number): () => number {
  let state = seed >>> 0;
  return function () {
    state = (state + 0x9e3779b9) >>> 0;
    let z = state;
    z = Math.imul(z ^ (z >>> 16), 0x21f0aaad);
    z = Math.imul(z ^ (z >>> 15), 0x735a2d97);
    return (z ^ (z >>> 15)) >>> 0;
  };
}

export function seededUniform(seed: number): () => number {
  const sm = splitmix32(seed);
  let a = sm(), b = sm(), c = sm(), d = sm();
  return function (): number {
    const t = b << 9;
    const r = (a + d) >>> 0;
    c ^= a;
    d ^= b;
    b ^= c;
    a ^= d;
    c ^= t;
    d = ((d << 11) | (d >>> 21)) >>> 0;
    return r / 4294967296;
  };
}

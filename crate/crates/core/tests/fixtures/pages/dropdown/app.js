var state = { open: false, picked: null };

function init() {
  document.getElementById('menu').addEventListener('click', openMenu);
}

function openMenu() {
  state.open = true;
  function neverCalled() {
    return state.picked.toUpperCase();
  }
  document.querySelector('.menu-list').hidden = false;
}

function pickFirst() {
  function label(i) { return 'item ' + i; }
  state.picked = label(1);
}

function pickSecond() {
  state.picked = 'item 2';
}

function unusedHelper(a, b) {
  return a.concat(b).filter(function (x) { return x != null; });
}

var legacyInit = function () {
  window.onload = function () { init(); };
};
